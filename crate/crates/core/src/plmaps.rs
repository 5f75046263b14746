//! Piecewise-linear maps with prescribed slope ratios, their Markov
//! structure, and the affine/flat Lorenz specifics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::Side;
use crate::linalg::{self, CMatrix, C64};
use crate::transversality::{self, MarkedOrbit};

/// A continuous piecewise-linear map of [-1,1] with `nu` turning points,
/// branch slopes `eps_i kappa_i s`, determined by its turning values `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlSpec {
    pub epsilon: i8,
    pub kappa: Vec<f64>,
    pub v: Vec<f64>,
    /// Slope scale.
    pub s: f64,
    /// Turning points `c_0 = -1 < c_1 < ... < c_{nu+1} = 1`.
    pub turning: Vec<f64>,
    /// Branch slopes `s_1, ..., s_{nu+1}`.
    pub slopes: Vec<f64>,
}

impl PlSpec {
    pub fn from_values(epsilon: i8, kappa: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let nu = v.len();
        if nu == 0 || kappa.len() != nu + 1 {
            return Err(Error::InvalidValueVector(format!(
                "need nu >= 1 values and nu + 1 slope ratios, got {} and {}",
                nu,
                kappa.len()
            )));
        }
        if epsilon != 1 && epsilon != -1 {
            return Err(Error::InvalidValueVector("epsilon must be +1 or -1".into()));
        }
        if kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidValueVector("slope ratios must be positive".into()));
        }
        let eps = |i: usize| sign_at(epsilon, i);
        let ext = extended(epsilon, &v);
        for i in 1..=nu + 1 {
            if !(eps(i) * (ext[i] - ext[i - 1]) > 0.0) {
                return Err(Error::InvalidValueVector(format!(
                    "eps_{i} (v_{i} - v_{}) must be positive",
                    i - 1
                )));
            }
        }
        let terms: Vec<f64> = (1..=nu + 1)
            .map(|i| (ext[i] - ext[i - 1]) * eps(i) / kappa[i - 1])
            .collect();
        let s = terms.iter().sum::<f64>() / 2.0;
        let mut turning = Vec::with_capacity(nu + 2);
        turning.push(-1.0);
        let mut acc = 0.0;
        for t in &terms[..nu] {
            acc += t;
            turning.push(-1.0 + acc / s);
        }
        turning.push(1.0);
        let slopes = (1..=nu + 1).map(|i| eps(i) * kappa[i - 1] * s).collect();
        Ok(PlSpec {
            epsilon,
            kappa,
            v,
            s,
            turning,
            slopes,
        })
    }

    pub fn nu(&self) -> usize {
        self.v.len()
    }

    /// `eps_i = (-1)^{i-1} eps`, 1-based.
    pub fn eps(&self, i: usize) -> f64 {
        sign_at(self.epsilon, i)
    }

    /// `v_0, ..., v_{nu+1}` with the fixed end values.
    pub fn extended_values(&self) -> Vec<f64> {
        extended(self.epsilon, &self.v)
    }

    /// 1-based branch index containing `x`; `None` at a turning point without a side.
    pub fn branch(&self, x: f64, side: Side) -> Option<usize> {
        let nu = self.nu();
        for i in 1..=nu {
            let c = self.turning[i];
            if x == c {
                return match side {
                    Side::Minus => Some(i),
                    Side::Plus => Some(i + 1),
                    Side::TwoSided => None,
                };
            }
            if x < c {
                return Some(i);
            }
        }
        Some(nu + 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.branch(x, Side::Minus).unwrap();
        let ext = self.extended_values();
        ext[i - 1] + self.slopes[i - 1] * (x - self.turning[i - 1])
    }

    /// Gradient of `g(x)` with respect to `v`, on branch `i`.
    pub fn value_gradient(&self, x: f64, i: usize) -> Vec<f64> {
        let nu = self.nu();
        let r = |m: usize| self.eps(m) / self.kappa[m - 1];
        (1..=nu)
            .map(|k| {
                let ds = (r(k) - r(k + 1)) / 2.0;
                let mut dsum = 0.0;
                if k < i {
                    dsum += r(k);
                }
                if k + 1 < i {
                    dsum -= r(k + 1);
                }
                let direct = if k == i - 1 { 1.0 } else { 0.0 };
                direct + self.eps(i) * self.kappa[i - 1] * ((x + 1.0) * ds - dsum)
            })
            .collect()
    }

    /// Turning values read back from the map.
    pub fn extremal_values(&self) -> Vec<f64> {
        (1..=self.nu()).map(|i| self.eval(self.turning[i])).collect()
    }
}

fn sign_at(epsilon: i8, i: usize) -> f64 {
    let e = epsilon as f64;
    if i % 2 == 1 {
        e
    } else {
        -e
    }
}

fn extended(epsilon: i8, v: &[f64]) -> Vec<f64> {
    let nu = v.len();
    let mut ext = Vec::with_capacity(nu + 2);
    ext.push(-sign_at(epsilon, 1));
    ext.extend_from_slice(v);
    ext.push(sign_at(epsilon, nu + 1));
    ext
}

pub fn pl_from_values(epsilon: i8, kappa: Vec<f64>, v: Vec<f64>) -> Result<PlSpec> {
    PlSpec::from_values(epsilon, kappa, v)
}

/// Interval partition of [-1,1] cut by the (finite) critical orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPartition {
    /// Cut points `-1 = a_0 < ... < a_n = 1`.
    pub cuts: Vec<f64>,
    /// `covers[i]` lists the intervals contained in `g(I_i)`.
    pub covers: Vec<Vec<usize>>,
    /// 1-based branch index each interval lies on.
    pub branch: Vec<usize>,
}

impl MarkovPartition {
    pub fn len(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn widths(&self) -> Vec<f64> {
        self.cuts.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

const MERGE_TOL: f64 = 1e-12;
const ORBIT_CAP: usize = 4096;

fn insert_point(points: &mut Vec<f64>, x: f64) -> bool {
    if points.iter().any(|p| (p - x).abs() <= MERGE_TOL) {
        false
    } else {
        points.push(x);
        true
    }
}

pub fn markov_partition(spec: &PlSpec) -> Result<MarkovPartition> {
    let mut points = vec![-1.0, 1.0];
    for j in 1..=spec.nu() {
        let mut x = spec.turning[j];
        insert_point(&mut points, x);
        let mut closed = false;
        for _ in 0..ORBIT_CAP {
            x = spec.eval(x.clamp(-1.0, 1.0));
            if !insert_point(&mut points, x) {
                closed = true;
                break;
            }
        }
        if !closed {
            return Err(Error::OrbitNotFinite {
                index: j,
                cap: ORBIT_CAP,
            });
        }
    }
    points.sort_by(f64::total_cmp);
    let n = points.len() - 1;
    let mut covers = Vec::with_capacity(n);
    let mut branch = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (points[i], points[i + 1]);
        let mid = 0.5 * (a + b);
        let br = spec.branch(mid, Side::TwoSided).unwrap();
        let (ya, yb) = (spec.eval(a), spec.eval(b));
        let (lo, hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
        let covered = (0..n)
            .filter(|&m| points[m] >= lo - 1e-10 && points[m + 1] <= hi + 1e-10)
            .collect();
        covers.push(covered);
        branch.push(br);
    }
    Ok(MarkovPartition {
        cuts: points,
        covers,
        branch,
    })
}

fn reachable(partition: &MarkovPartition, from: usize) -> Vec<bool> {
    let mut seen = vec![false; partition.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(i) = stack.pop() {
        for &m in &partition.covers[i] {
            if !seen[m] {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen
}

/// Ergodicity of a Markov PL map: the forward orbits of every two partition
/// intervals must meet.
pub fn pl_ergodic(spec: &PlSpec) -> Result<bool> {
    let part = markov_partition(spec)?;
    let reach: Vec<Vec<bool>> = (0..part.len()).map(|i| reachable(&part, i)).collect();
    for i in 0..part.len() {
        for j in i + 1..part.len() {
            if !(0..part.len()).any(|m| reach[i][m] && reach[j][m]) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub partition: MarkovPartition,
    /// `A[i][m] = 1/kappa_{branch(i)}` when `I_m` lies in `g(I_i)`.
    pub matrix: CMatrix,
    pub widths: Vec<f64>,
    /// `max |v - s^{-1} A v|`.
    pub residual: f64,
    /// `det(I - s^{-1} A)`.
    pub det: f64,
}

/// Width relation of the Markov partition. `g` stretches `I_i` by
/// `s kappa_j`, so the widths satisfy `s v = A v`.
pub fn pl_markov_matrix(spec: &PlSpec) -> Result<MarkovReport> {
    let part = markov_partition(spec)?;
    let n = part.len();
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        let k = spec.kappa[part.branch[i] - 1];
        for &m in &part.covers[i] {
            a[(i, m)] = C64::new(1.0 / k, 0.0);
        }
    }
    let widths = part.widths();
    let wv: Vec<C64> = widths.iter().map(|&x| C64::new(x, 0.0)).collect();
    let av = a.mul_vec(&wv);
    let residual = widths
        .iter()
        .zip(&av)
        .map(|(v, y)| (v - y.re / spec.s).abs())
        .fold(0.0, f64::max);
    let det = linalg::det(&a.identity_minus(C64::new(1.0 / spec.s, 0.0))).re;
    Ok(MarkovReport {
        partition: part,
        matrix: a,
        widths,
        residual,
        det,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzRReport {
    pub value: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub quotient: f64,
    pub positive: bool,
}

/// The two-parameter relation map of a Lorenz marked orbit in deformation
/// coordinates `w`, with a central-difference Jacobian and the oriented
/// transversality quotient.
pub fn lorenz_r(orbit: &MarkedOrbit, w: [f64; 2]) -> Result<LorenzRReport> {
    if !orbit.family.is_lorenz() {
        return Err(Error::Unsupported("lorenz_r needs a Lorenz family".into()));
    }
    let def = orbit.deformation()?;
    let eval = |w: [f64; 2]| -> Result<[f64; 2]> {
        let wc = [C64::new(w[0], 0.0), C64::new(w[1], 0.0)];
        let r = transversality::r_map(orbit, &def, &wc)?;
        Ok([r[0].re, r[1].re])
    };
    let value = eval(w)?;
    let mut jacobian = [[0.0; 2]; 2];
    for k in 0..2 {
        let h = 1e-6 * (1.0 + w[k].abs());
        let mut wp = w;
        let mut wm = w;
        wp[k] += h;
        wm[k] -= h;
        let (rp, rm) = (eval(wp)?, eval(wm)?);
        for j in 0..2 {
            jacobian[j][k] = (rp[j] - rm[j]) / (2.0 * h);
        }
    }
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    let products: f64 = orbit
        .orbits
        .iter()
        .map(|o| o.deriv_products[o.q - 1])
        .product();
    let quotient = det / products;
    Ok(LorenzRReport {
        value,
        jacobian,
        quotient,
        positive: quotient > 0.0,
    })
}

/// Topological entropies of the tent map `T_t` and the symmetric affine
/// Lorenz map `f_t` (both `log t`).
pub fn tent_lorenz_entropy_bridge(t: f64) -> Result<(f64, f64)> {
    if !(t > 1.0 && t <= 2.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must lie in (1,2]")));
    }
    Ok((
        crate::kneading::constant_slope_entropy(t),
        crate::kneading::constant_slope_entropy(t),
    ))
}

/// `T_t(x) = (t-1) - t|x|`.
pub fn tent_map(t: f64, x: f64) -> f64 {
    (t - 1.0) - t * x.abs()
}

/// Symmetric affine Lorenz map with c = 0 (undefined at 0 itself).
pub fn symmetric_lorenz_map(t: f64, x: f64) -> f64 {
    if x < 0.0 {
        t * x + (t - 1.0)
    } else {
        t * x - (t - 1.0)
    }
}
