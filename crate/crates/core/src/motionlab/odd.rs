//! Constants and admissibility predicates for `|x|^l + c` with `l` odd.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MotionGrid;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::roots::bisect;

const MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddConstants {
    pub ell: u32,
    pub theta: f64,
    pub r: f64,
    /// `|F(R)|` for the defining polynomial-like equation of `R`.
    pub residual: f64,
    /// `2 R cos(theta / l^2)`.
    pub lhs: f64,
    /// `2^{1/(l-1)} + 2^{1/(l^2-l)}`.
    pub rhs: f64,
    pub margin: f64,
}

fn r_equation(ell: f64, r: f64) -> f64 {
    let alpha = PI * (ell + 1.0) / (2.0 * (ell.powi(3) - 1.0));
    r.powf(2.0 * ell)
        - r * r
        - r.powf(2.0 / ell)
        - 2.0 * r.powf(1.0 + 1.0 / ell) * alpha.cos()
}

pub fn odd_constants(ell: u32) -> Result<OddConstants> {
    if ell < 3 || ell % 2 == 0 {
        return Err(Error::InvalidArgument(format!("l = {ell} must be odd and >= 3")));
    }
    let l = ell as f64;
    let theta = PI * l * l / (2.0 * (l.powi(3) - 1.0));
    let r = bisect(|r| r_equation(l, r), 1.0, 2.0)?;
    let lhs = 2.0 * r * (theta / (l * l)).cos();
    let rhs = 2f64.powf(1.0 / (l - 1.0)) + 2f64.powf(1.0 / (l * l - l));
    Ok(OddConstants {
        ell,
        theta,
        r,
        residual: r_equation(l, r).abs(),
        lhs,
        rhs,
        margin: lhs - rhs,
    })
}

/// A superstable orbit of `|x|^l + c1` with the point set used for motions:
/// the orbit of 0 together with `+-z1`, where `z1 = |c1|^{1/l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddOrbit {
    pub ell: u32,
    pub c1: f64,
    /// `f^{q+1}(0) = 0`.
    pub q: usize,
    /// `f^j(0)` for `0 <= j <= q`.
    pub orbit: Vec<f64>,
    /// `-w` is the orientation reversing fixed point.
    pub w: f64,
    pub z1: f64,
}

fn odd_map(ell: u32, c1: f64, x: f64) -> f64 {
    x.abs().powi(ell as i32) + c1
}

impl OddOrbit {
    /// Checks the combinatorial hypotheses: 0 is periodic, `c2 > c3 > c4 > 0`
    /// and no orbit point lies in `[-w, 0)`.
    pub fn new(ell: u32, c1: f64, tol: f64) -> Result<Self> {
        if ell < 3 || ell % 2 == 0 || !(c1 < 0.0) {
            return Err(Error::InvalidArgument(format!("l = {ell}, c1 = {c1}")));
        }
        let mut orbit = vec![0.0];
        let mut x = 0.0;
        loop {
            x = odd_map(ell, c1, x);
            if x.abs() < tol {
                break;
            }
            if orbit.len() > 4096 || !x.is_finite() {
                return Err(Error::HypothesisViolated("0 is not periodic".into()));
            }
            orbit.push(x);
        }
        let q = orbit.len() - 1;
        if q < 4 || !(orbit[2] > orbit[3] && orbit[3] > orbit[4] && orbit[4] > 0.0) {
            return Err(Error::HypothesisViolated("c2 > c3 > c4 > 0 fails".into()));
        }
        let w = bisect(|w| odd_map(ell, 0.0, w) + w + c1, 0.0, -c1)?;
        if let Some(j) = (1..=q).find(|&j| orbit[j] >= -w && orbit[j] < 0.0) {
            return Err(Error::HypothesisViolated(format!("f^{j}(0) = {} lies in [-w, 0)", orbit[j])));
        }
        let z1 = (-c1).powf(1.0 / ell as f64);
        // f(c_q) = 0, so c_q is one of +-z1
        orbit[q] = z1.copysign(orbit[q]);
        Ok(OddOrbit { ell, c1, q, orbit, w, z1 })
    }

    pub fn period(&self) -> usize {
        self.q + 1
    }

    pub fn points(&self) -> Vec<f64> {
        let mut p = self.orbit.clone();
        p.push(-self.orbit[self.q]);
        p
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (0..=self.q).map(|j| format!("c{j}")).collect();
        l.push(if self.orbit[self.q] > 0.0 { "-z1".into() } else { "z1".into() });
        l
    }

    pub fn identity_motion(&self, grid: &super::GridSpec) -> MotionGrid {
        let p = self.points();
        MotionGrid::from_fn(&p, self.labels(), grid, |i, _| C64::new(p[i], 0.0))
    }

    /// `sum_{n=0}^{q} 1 / Df^n(c1)`.
    pub fn derivative_sum(&self) -> f64 {
        let l = self.ell as f64;
        let mut d = 1.0;
        let mut s = 1.0;
        for n in 1..=self.q {
            let x = self.orbit[n];
            d *= l * x.abs().powi(self.ell as i32 - 1) * x.signum();
            s += 1.0 / d;
        }
        s
    }

    fn index_of(&self, pts: &[f64], x: f64) -> Result<usize> {
        pts.iter()
            .position(|&p| (p - x).abs() <= MATCH_TOL * (1.0 + x.abs()))
            .ok_or_else(|| Error::HypothesisViolated(format!("{x} is not a point of the motion")))
    }
}

/// `h(0) = 0` and `(+-h^(x))^l = h(f(x)) - h(c1)` with the branch through `x`.
pub fn odd_lift(motion: &MotionGrid, odd: &OddOrbit) -> Result<MotionGrid> {
    let pts = &motion.points;
    let ic1 = odd.index_of(pts, odd.c1)?;
    let images = pts
        .iter()
        .map(|&x| odd.index_of(pts, odd_map(odd.ell, odd.c1, x)))
        .collect::<Result<Vec<_>>>()?;
    let inv = 1.0 / odd.ell as f64;
    let mut out = motion.clone();
    for (i, &x) in pts.iter().enumerate() {
        for a in 0..motion.rays {
            for k in 0..motion.radii.len() {
                out.values[i][a][k] = if x == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    let d = motion.values[images[i]][a][k] - motion.values[ic1][a][k];
                    if d.norm() == 0.0 {
                        return Err(Error::SingularLift(x));
                    }
                    d.powf(inv) * x.signum()
                };
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleReport {
    pub constants: OddConstants,
    /// Margins for A1..A8; positive means the condition holds with slack.
    pub margins: [f64; 8],
    pub passed: bool,
    pub failed: Vec<String>,
}

pub fn admissible_check(motion: &MotionGrid, odd: &OddOrbit) -> Result<AdmissibleReport> {
    let k = odd_constants(odd.ell)?;
    let l = odd.ell as f64;
    let pts = &motion.points;
    let i0 = odd.index_of(pts, 0.0)?;
    let iz = odd.index_of(pts, odd.z1)?;
    let izm = odd.index_of(pts, -odd.z1)?;
    let ic1 = odd.index_of(pts, odd.c1)?;
    let ic2 = odd.index_of(pts, odd.orbit[2])?;
    let a7_bound = 2f64.powf(1.0 / (l - 1.0));
    let a8_bound = 2f64.powf(1.0 / (l * l - l));
    let mut m = [f64::INFINITY; 8];
    for a in 0..motion.rays {
        for r in 0..motion.radii.len() {
            let h = |i: usize| motion.values[i][a][r];
            let hz = h(iz);
            m[0] = m[0].min(-(h(izm) + hz).norm().max(h(i0).norm()));
            m[4] = m[4]
                .min(k.theta / (l * l) - (-h(ic1)).arg().abs())
                .min(k.theta / l - h(ic2).arg().abs());
            m[5] = m[5]
                .min(h(ic1).norm() - k.r)
                .min(h(ic2).norm() - k.r.powf(1.0 / l));
            m[7] = m[7].min(a8_bound - hz.norm());
            for (i, &x) in pts.iter().enumerate() {
                let hx = h(i);
                if x > 0.0 && x < odd.w {
                    m[1] = m[1].min(hz.norm() - hx.norm());
                }
                if x > odd.w {
                    m[2] = m[2].min(k.theta - hx.arg().abs());
                }
                if x < -odd.w {
                    m[3] = m[3].min(k.theta - (-hx).arg().abs());
                }
                m[6] = m[6].min(a7_bound - hx.norm());
            }
        }
    }
    // A1, A2, A7 and A8 are non-strict
    let ok = [
        m[0] >= -1e-12,
        m[1] >= 0.0,
        m[2] > 0.0,
        m[3] > 0.0,
        m[4] > 0.0,
        m[5] > 0.0,
        m[6] >= 0.0,
        m[7] >= 0.0,
    ];
    let failed: Vec<String> = ok
        .iter()
        .enumerate()
        .filter(|(_, &o)| !o)
        .map(|(i, _)| format!("A{}", i + 1))
        .collect();
    Ok(AdmissibleReport {
        constants: k,
        margins: m,
        passed: failed.is_empty(),
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::GridSpec;
    use super::*;

    const C1_L3: f64 = -1.4124477412407752;

    #[test]
    fn theta_three() {
        let k = odd_constants(3).unwrap();
        assert!((k.theta - 9.0 * PI / 52.0).abs() < 1e-15);
        assert!(k.residual <= 1e-13);
        assert!(k.lhs > 2.61);
        assert!(k.rhs < 2.54);
        assert!((k.r - 1.3445249005727449).abs() < 1e-12);
    }

    #[test]
    fn lemma_margins_positive() {
        for ell in (3..=31).step_by(2) {
            let k = odd_constants(ell).unwrap();
            assert!(k.residual <= 1e-13, "l = {ell}: {}", k.residual);
            assert!(k.r > 1.0 && k.r < 2.0);
            assert!(k.margin > 0.0, "l = {ell}");
        }
        assert!(odd_constants(4).is_err());
        assert!(odd_constants(1).is_err());
    }

    #[test]
    fn orbit_hypotheses() {
        let o = OddOrbit::new(3, C1_L3, 1e-9).unwrap();
        assert_eq!(o.period(), 5);
        assert!(o.w > 0.0 && o.w < o.z1);
        assert!(o.derivative_sum() > 0.0);
        assert!(matches!(
            OddOrbit::new(3, -1.0, 1e-9),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn identity_is_admissible() {
        let o = OddOrbit::new(3, C1_L3, 1e-9).unwrap();
        let m = o.identity_motion(&GridSpec::new(8, 4, 0.05).unwrap());
        let r = admissible_check(&m, &o).unwrap();
        assert!(r.passed, "{:?}", r);
        assert!(r.margins.iter().all(|&x| x >= 0.0));
        // the lift of the identity is the identity
        let l = odd_lift(&m, &o).unwrap();
        for (u, v) in l.values.iter().flatten().flatten().zip(m.values.iter().flatten().flatten()) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn a7_violation_flagged() {
        let o = OddOrbit::new(3, C1_L3, 1e-9).unwrap();
        let p = o.points();
        let grid = GridSpec::new(8, 4, 0.05).unwrap();
        let m = MotionGrid::from_fn(&p, o.labels(), &grid, |i, _| {
            if i == 2 { C64::new(1.5, 0.0) } else { C64::new(p[i], 0.0) }
        });
        let r = admissible_check(&m, &o).unwrap();
        assert!(!r.passed);
        assert!(r.failed.contains(&"A7".to_string()));
        assert!(r.margins[6] < 0.0);
    }

    #[test]
    fn small_perturbation_lift_stays_admissible() {
        let o = OddOrbit::new(3, C1_L3, 1e-9).unwrap();
        let p = o.points();
        let grid = GridSpec::new(8, 4, 0.05).unwrap();
        let iz = p.iter().position(|&x| x == o.z1).unwrap();
        let izm = p.iter().position(|&x| x == -o.z1).unwrap();
        let m = MotionGrid::from_fn(&p, o.labels(), &grid, |i, l| {
            let v = if p[i] == 0.0 || i == iz || i == izm { 0.0 } else { 1e-4 * (i as f64 - 2.5) };
            p[i] + l * v
        });
        let mut h = m;
        for _ in 0..5 {
            h = odd_lift(&h, &o).unwrap();
            let r = admissible_check(&h, &o).unwrap();
            assert!(r.passed, "{:?}", r);
            assert!(r.margins[0] >= -1e-15);
        }
    }
}
