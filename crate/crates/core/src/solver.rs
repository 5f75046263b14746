//! Parameters realizing critical relations: superstable cycles, prescribed
//! kneading words, and two-parameter relation systems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilySpec, SidedPoint};
use crate::kneading::{kneading, mt_compare_seq, KneadingSequence, Order};
use crate::roots;

pub const GRID: usize = 10_000;
pub const MAX_PERIOD: usize = 64;

/// `f^q(crit) - crit` at a one-parameter value, together with all the
/// intermediate displacements `f^n(crit) - crit`, `n = 1..=q`.
fn displacements(family: &FamilySpec, c: f64, q: usize) -> Result<Vec<f64>> {
    let params = [c];
    let turn = family.critical_data(&params)?[0].point;
    let mut x = turn;
    let mut out = Vec::with_capacity(q);
    for _ in 0..q {
        let y = family.eval_unchecked(&params, x)?;
        out.push(y - turn.value);
        x = SidedPoint::new(y);
    }
    Ok(out)
}

fn check_one_param(family: &FamilySpec, q: usize) -> Result<()> {
    if family.param_dim() != 1 || family.is_lorenz() || family.is_circle() {
        return Err(Error::Unsupported(format!(
            "{} is not a one-parameter unimodal family",
            family.name()
        )));
    }
    if q == 0 || q > MAX_PERIOD {
        return Err(Error::InvalidArgument(format!("period {q} outside 1..={MAX_PERIOD}")));
    }
    Ok(())
}

fn residual_scale(family: &FamilySpec, c: f64) -> f64 {
    1.0 + family
        .critical_data(&[c])
        .map(|d| d[0].point.value.abs())
        .unwrap_or(0.0)
}

/// Smallest `n` with `|f^n(crit) - crit|` below `tol`.
pub fn minimal_period(family: &FamilySpec, c: f64, q: usize, tol: f64) -> Result<Option<usize>> {
    let d = displacements(family, c, q)?;
    Ok(d.iter().position(|x| x.abs() <= tol).map(|n| n + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superstable {
    pub param: f64,
    pub period: usize,
    pub residual: f64,
}

fn polish(family: &FamilySpec, q: usize, a: f64, b: f64) -> Result<f64> {
    let f = |c: f64| displacements(family, c, q).map(|d| d[q - 1]).unwrap_or(f64::NAN);
    roots::brent(f, a, b, 0.0, 0.0, 200)
}

/// Every parameter in `bracket` where the critical point is periodic with
/// minimal period `<= max_q`. Sign changes of `f^n(crit) - crit` are located on
/// a uniform grid of `n_grid` cells and refined with Brent's method.
pub fn superstable_parameters(
    family: &FamilySpec,
    max_q: usize,
    bracket: (f64, f64),
    n_grid: usize,
) -> Result<Vec<Superstable>> {
    check_one_param(family, max_q)?;
    let (lo, hi) = bracket;
    let h = (hi - lo) / n_grid as f64;
    let chunk = 4096;
    let n_chunks = n_grid.div_ceil(chunk);
    let cells: Vec<(usize, f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<Vec<(usize, f64, f64)>> {
            let start = ci * chunk;
            let end = ((ci + 1) * chunk).min(n_grid);
            let at = |i: usize| if i == n_grid { hi } else { lo + h * i as f64 };
            let mut out = Vec::new();
            let mut prev = displacements(family, at(start), max_q)?;
            for i in start..end {
                let next = displacements(family, at(i + 1), max_q)?;
                for n in 0..max_q {
                    if prev[n] == 0.0 || prev[n].signum() != next[n].signum() {
                        out.push((n + 1, at(i), at(i + 1)));
                    }
                }
                prev = next;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut found: Vec<Superstable> = cells
        .par_iter()
        .filter_map(|&(n, a, b)| {
            let c = polish(family, n, a, b).ok()?;
            let tol = 1e-9 * residual_scale(family, c);
            let period = minimal_period(family, c, n, tol).ok()??;
            if period != n {
                return None;
            }
            let residual = displacements(family, c, n).ok()?[n - 1].abs();
            Some(Superstable {
                param: c,
                period,
                residual,
            })
        })
        .collect();
    found.sort_by(|x, y| x.param.total_cmp(&y.param).then(x.period.cmp(&y.period)));
    found.dedup_by(|x, y| x.period == y.period && (x.param - y.param).abs() < 1e-11);
    Ok(found)
}

/// A parameter in `bracket` at which the critical point has minimal period `q`.
/// Among several, the leftmost is returned.
pub fn solve_superstable_1d(family: &FamilySpec, q: usize, bracket: (f64, f64)) -> Result<f64> {
    check_one_param(family, q)?;
    let (lo, hi) = bracket;
    let h = (hi - lo) / GRID as f64;
    let at = |i: usize| if i == GRID { hi } else { lo + h * i as f64 };
    let f = |c: f64| displacements(family, c, q).map(|d| d[q - 1]);
    let mut any_root = false;
    let mut prev = f(at(0))?;
    for i in 0..GRID {
        let next = f(at(i + 1))?;
        if prev == 0.0 || prev.signum() != next.signum() {
            any_root = true;
            let c = if prev == 0.0 { at(i) } else { polish(family, q, at(i), at(i + 1))? };
            let tol = 1e-9 * residual_scale(family, c);
            if minimal_period(family, c, q, tol)? == Some(q) {
                return Ok(c);
            }
        }
        prev = next;
    }
    if next_is_zero(f(hi)?) {
        any_root = true;
        if minimal_period(family, hi, q, 1e-9 * residual_scale(family, hi))? == Some(q) {
            return Ok(hi);
        }
    }
    if any_root {
        Err(Error::PeriodCollision {
            wanted: q,
            found: 0,
        })
    } else {
        Err(Error::NoRoot(format!("no sign change of f^{q} on [{lo}, {hi}]")))
    }
}

fn next_is_zero(x: f64) -> bool {
    x == 0.0
}

/// Parameter whose kneading sequence equals `word` (which must end in 0),
/// found by bisection on the Milnor–Thurston order and a final Brent polish.
pub fn solve_word(
    family: &FamilySpec,
    word: &KneadingSequence,
    bracket: (f64, f64),
    delta_hit: f64,
) -> Result<f64> {
    if word.symbols.last() != Some(&0) {
        return Err(Error::InvalidArgument("word must end in 0".into()));
    }
    let m = word.len();
    check_one_param(family, m)?;
    let knead = |c: f64| -> Result<KneadingSequence> {
        Ok(kneading(family, &[c], m, delta_hit)?.single().cloned().unwrap())
    };
    let (mut lo, mut hi) = bracket;
    let (klo, khi) = (knead(lo)?, knead(hi)?);
    let cmp_lo = mt_compare_seq(&klo, word);
    let cmp_hi = mt_compare_seq(&khi, word);
    if cmp_lo == Order::Equal {
        return finish(family, word, lo, lo, lo, delta_hit);
    }
    if cmp_hi == Order::Equal {
        return finish(family, word, hi, hi, hi, delta_hit);
    }
    // orientation of the order along the bracket
    let increasing = match (cmp_lo, cmp_hi) {
        (Order::Less, Order::Greater) => true,
        (Order::Greater, Order::Less) => false,
        _ => {
            return Err(Error::NotRealized(format!(
                "{word} is not between the endpoint words {klo} and {khi}"
            )))
        }
    };
    let below = if increasing { Order::Less } else { Order::Greater };
    let mut k_lo = klo;
    let mut k_hi = khi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let km = knead(mid)?;
        // the order must be monotone across lo < mid < hi
        let consistent = mt_compare_seq(&k_lo, &km) != below.reversed()
            && mt_compare_seq(&km, &k_hi) != below.reversed();
        if !consistent {
            return Err(Error::MonotonicityViolation(format!(
                "words at {lo}, {mid}, {hi} are out of order: {k_lo}, {km}, {k_hi}"
            )));
        }
        match mt_compare_seq(&km, word) {
            Order::Equal => return finish(family, word, mid, lo, hi, delta_hit),
            o if o == below => {
                lo = mid;
                k_lo = km;
            }
            Order::UndecidedPrefix => {
                return Err(Error::NotRealized(format!("undecided comparison at {mid}")))
            }
            _ => {
                hi = mid;
                k_hi = km;
            }
        }
    }
    finish(family, word, 0.5 * (lo + hi), lo, hi, delta_hit)
}

fn finish(
    family: &FamilySpec,
    word: &KneadingSequence,
    guess: f64,
    lo: f64,
    hi: f64,
    delta_hit: f64,
) -> Result<f64> {
    let m = word.len();
    let c = if lo < hi {
        polish(family, m, lo, hi).unwrap_or(guess)
    } else {
        guess
    };
    let got = kneading(family, &[c], m, delta_hit)?;
    let got = got.single().unwrap();
    if got.symbols != word.symbols {
        return Err(Error::NotRealized(format!("converged to {c} with word {got}")));
    }
    Ok(c)
}

/// One critical relation of a two-parameter family: the orbit of critical
/// point `from` lands on critical point `to` after `q` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalRelation {
    pub from: usize,
    pub q: usize,
    pub to: usize,
}

/// Residuals `f^{q}(c_from) - c_to` (wrapped to (-1/2, 1/2] on the circle).
pub fn relation_residual(
    family: &FamilySpec,
    params: &[f64],
    relations: &[CriticalRelation],
) -> Result<Vec<f64>> {
    family.check_params(params)?;
    let crit = family.critical_data(params)?;
    relations
        .iter()
        .map(|rel| {
            let start = crit
                .get(rel.from)
                .ok_or_else(|| Error::InvalidArgument(format!("no critical point {}", rel.from)))?;
            let target = crit
                .get(rel.to)
                .ok_or_else(|| Error::InvalidArgument(format!("no critical point {}", rel.to)))?;
            let mut x = start.point;
            for _ in 0..rel.q {
                x = SidedPoint::new(family.eval_unchecked(params, x)?);
            }
            let d = x.value - target.point.value;
            Ok(if family.is_circle() {
                (d + 0.5).rem_euclid(1.0) - 0.5
            } else {
                d
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solve2d {
    pub params: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton on a pair of critical relations with a central-difference
/// Jacobian.
pub fn solve_2d(
    family: &FamilySpec,
    relations: &[CriticalRelation; 2],
    initial: [f64; 2],
) -> Result<Solve2d> {
    if family.param_dim() != 2 {
        return Err(Error::Unsupported(format!("{} has no 2 parameters", family.name())));
    }
    let eval = |p: [f64; 2]| relation_residual(family, &p, relations);
    let mut p = initial;
    let mut r = eval(p)?;
    for it in 0..200 {
        let res = norm(&r);
        if res <= 1e-10 {
            return Ok(Solve2d {
                params: p,
                residual: res,
                iterations: it,
            });
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * (1.0 + p[k].abs());
            let (mut pp, mut pm) = (p, p);
            pp[k] += h;
            pm[k] -= h;
            let (rp, rm) = (eval(pp)?, eval(pm)?);
            for j in 0..2 {
                jac[j][k] = (rp[j] - rm[j]) / (2.0 * h);
            }
        }
        let cond = condition_2x2(&jac);
        if !(cond <= 1e12) {
            return Err(Error::SingularJacobian(cond));
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let step = [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = [p[0] - t * step[0], p[1] - t * step[1]];
            if let Ok(rc) = eval(cand) {
                if norm(&rc) < res {
                    p = cand;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Diverged(format!("no decrease from residual {res:e} at {p:?}")));
        }
    }
    let res = norm(&r);
    if res <= 1e-10 {
        return Ok(Solve2d {
            params: p,
            residual: res,
            iterations: 200,
        });
    }
    Err(Error::Diverged(format!("residual {res:e} after 200 steps")))
}

fn condition_2x2(a: &[[f64; 2]; 2]) -> f64 {
    let (p, q, r, s) = (a[0][0], a[0][1], a[1][0], a[1][1]);
    let fro2 = p * p + q * q + r * r + s * s;
    let det = (p * s - q * r).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    // sigma_max / sigma_min from the singular values of a 2x2 matrix
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax2 = 0.5 * (fro2 + disc);
    let smin2 = det * det / smax2;
    (smax2 / smin2).sqrt()
}

/// Grid points with the smallest relation residuals, as seeds for `solve_2d`.
pub fn seed_scan(
    family: &FamilySpec,
    relations: &[CriticalRelation; 2],
    ranges: [(f64, f64); 2],
    n: usize,
    keep: usize,
) -> Vec<[f64; 2]> {
    let mut pts: Vec<([f64; 2], f64)> = (0..n * n)
        .into_par_iter()
        .filter_map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let p = [
                ranges[0].0 + (ranges[0].1 - ranges[0].0) * (i as f64 + 0.5) / n as f64,
                ranges[1].0 + (ranges[1].1 - ranges[1].0) * (j as f64 + 0.5) / n as f64,
            ];
            let r = relation_residual(family, &p, relations).ok()?;
            Some((p, norm(&r)))
        })
        .collect();
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    pts.into_iter().take(keep).map(|x| x.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{CoreMap, FamilyKind};
    use std::f64::consts::PI;

    const AIRPLANE: f64 = -1.754_877_666_246_693;

    #[test]
    fn quadratic_superstable() {
        let q = FamilySpec::quadratic();
        assert_eq!(solve_superstable_1d(&q, 2, (-2.0, 0.0)).unwrap(), -1.0);
        let c = solve_superstable_1d(&q, 3, (-2.0, 0.0)).unwrap();
        assert!((c - AIRPLANE).abs() < 1e-12);
        assert!(matches!(
            solve_superstable_1d(&q, 2, (0.1, 0.2)),
            Err(Error::NoRoot(_))
        ));
        assert!(matches!(
            solve_superstable_1d(&q, 2, (-0.5, 0.2)),
            Err(Error::PeriodCollision { .. })
        ));
    }

    #[test]
    fn sine_fixed_critical_value() {
        let sin = FamilySpec::new(FamilyKind::MultiplicativeClassE { core: CoreMap::Sin }).unwrap();
        let a = solve_superstable_1d(&sin, 1, (0.1, PI - 0.1)).unwrap();
        assert!((a - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn words() {
        let q = FamilySpec::quadratic();
        let w = |s: &str| KneadingSequence::parse(s).unwrap();
        assert_eq!(solve_word(&q, &w("-0"), (-2.0, 0.25), 1e-9).unwrap(), -1.0);
        let c = solve_word(&q, &w("-+0"), (-2.0, 0.25), 1e-9).unwrap();
        assert!((c - AIRPLANE).abs() < 1e-12);
        assert_eq!(solve_word(&q, &w("0"), (-2.0, 0.25), 1e-9).unwrap(), 0.0);
        // not admissible for a unimodal map
        assert!(solve_word(&q, &w("--0"), (-2.0, 0.25), 1e-9).is_err());
    }

    #[test]
    fn all_periods_round_trip_through_marked_orbits() {
        let q = FamilySpec::quadratic();
        let found = superstable_parameters(&q, 6, (-2.0, 0.25), 200_000).unwrap();
        let counts: Vec<usize> =
            (1..=6).map(|p| found.iter().filter(|s| s.period == p).count()).collect();
        assert_eq!(counts, vec![1, 1, 1, 2, 3, 5]);
        for s in found {
            let o = crate::transversality::marked_orbit(&q, &[s.param], 1e-9).unwrap();
            assert_eq!(o.orbits[0].q, s.period);
        }
    }

    #[test]
    fn lorenz_pair_by_newton() {
        let lor = FamilySpec::new(FamilyKind::LorenzAffine).unwrap();
        let rels = [
            CriticalRelation { from: 0, q: 2, to: 0 },
            CriticalRelation { from: 1, q: 3, to: 0 },
        ];
        let s = solve_2d(&lor, &rels, [1.33, -0.13]).unwrap();
        assert!(s.residual <= 1e-10);
        assert!((s.params[0] - 1.324_717_957_243_649_2).abs() < 1e-9);
        assert!((s.params[1] + 0.139_680_581_996_170_95).abs() < 1e-9);
        // deterministic re-evaluation
        let r = relation_residual(&lor, &s.params, &rels).unwrap();
        assert!((norm(&r) - s.residual).abs() <= 1e-12);
    }

    #[test]
    fn symmetric_lorenz_is_the_tent() {
        let lor = FamilySpec::new(FamilyKind::LorenzAffine).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let rels = [
            CriticalRelation { from: 0, q: 3, to: 0 },
            CriticalRelation { from: 1, q: 3, to: 0 },
        ];
        let r = relation_residual(&lor, &[phi, 0.0], &rels).unwrap();
        assert!(norm(&r) < 1e-14);
    }

    #[test]
    fn arnold_fixed_critical_points() {
        let arn = FamilySpec::new(FamilyKind::Arnold { d: 1 }).unwrap();
        let rels = [
            CriticalRelation { from: 0, q: 1, to: 0 },
            CriticalRelation { from: 1, q: 1, to: 1 },
        ];
        let seeds = seed_scan(&arn, &rels, [(0.4, 0.6), (0.45, 0.6)], 40, 3);
        let s = solve_2d(&arn, &rels, seeds[0]).unwrap();
        let b = (0.25 + 1.0 / (4.0 * PI * PI)).sqrt();
        assert!(s.residual <= 1e-10);
        assert!((s.params[0] - 0.5).abs() < 1e-8 && (s.params[1] - b).abs() < 1e-8, "{s:?}");
    }

    #[test]
    fn condition_number() {
        assert!((condition_2x2(&[[2.0, 0.0], [0.0, 1.0]]) - 2.0).abs() < 1e-14);
        assert!(condition_2x2(&[[1.0, 1.0], [1.0, 1.0]]).is_infinite());
    }
}
