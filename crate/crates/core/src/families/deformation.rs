//! Local holomorphic deformations `(G_w, p)` of a marked map, evaluated at
//! complex `w` and `z`.
//!
//! Coordinates are the critical values `w_j = c_{1,j}`. A handle can be
//! reordered so that its coordinates follow the labelling of a marked orbit.

use std::f64::consts::PI;

use super::{arnold_critical_points, FamilyKind, FamilySpec, Side, SidedPoint};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Lu, C64};
use crate::plmaps::PlSpec;

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Complex `z^l` continued from the positive real axis.
fn cpow(z: C64, ell: f64) -> C64 {
    if ell.fract() == 0.0 && ell.abs() < 1e6 {
        z.powi(ell as i32)
    } else {
        z.powf(ell)
    }
}

#[derive(Debug, Clone)]
struct ArnoldBase {
    d: f64,
    /// Base critical points.
    e: [f64; 2],
    /// Integer shifts making the base critical values land in [0,1).
    k: [f64; 2],
    a: f64,
    b: f64,
}

/// Solution of the Arnold critical-value system at some complex `w`.
struct ArnoldState {
    a: C64,
    b: C64,
    e: [C64; 2],
    /// Rows: d(a, b, e1, e2) / d(w1, w2).
    jac: [[C64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct Deformation {
    family: FamilySpec,
    params: Vec<f64>,
    /// Marked points in native order.
    marked: Vec<SidedPoint>,
    /// Critical values in native order.
    base: Vec<f64>,
    /// Local index -> native index.
    order: Vec<usize>,
    pl: Option<PlSpec>,
    arnold: Option<ArnoldBase>,
}

impl Deformation {
    pub fn new(family: &FamilySpec, params: &[f64]) -> Result<Self> {
        family.check_params(params)?;
        let crit = family.critical_data(params)?;
        let marked: Vec<SidedPoint> = crit.iter().map(|c| c.point).collect();
        let base: Vec<f64> = crit.iter().map(|c| c.value).collect();
        let pl = match family.kind() {
            FamilyKind::PiecewiseLinear { .. } => Some(family.pl_spec(params)?),
            _ => None,
        };
        let arnold = match family.kind() {
            FamilyKind::Arnold { d } => {
                let e = arnold_critical_points(family, params)?;
                let raw = |t: f64| *d as f64 * t + params[0] + params[1] * (2.0 * PI * t).sin();
                let base = ArnoldBase {
                    d: *d as f64,
                    e,
                    k: [raw(e[0]).floor(), raw(e[1]).floor()],
                    a: params[0],
                    b: params[1],
                };
                Some(base)
            }
            _ => None,
        };
        let n = marked.len();
        let def = Deformation {
            family: family.clone(),
            params: params.to_vec(),
            marked,
            base,
            order: (0..n).collect(),
            pl,
            arnold,
        };
        if def.arnold.is_some() {
            def.arnold_jacobian_check()?;
        }
        Ok(def)
    }

    /// Same deformation with coordinates relabelled: local `j` is native `order[j]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.marked.len()).collect::<Vec<_>>() {
            return Err(Error::WrongShape(format!("{order:?} is not a permutation")));
        }
        let mut out = self.clone();
        out.order = order.iter().map(|&o| self.order[o]).collect();
        Ok(out)
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.marked.len()
    }

    /// Marked points `c_{0,j}` in local order.
    pub fn marked_points(&self) -> Vec<SidedPoint> {
        self.order.iter().map(|&o| self.marked[o]).collect()
    }

    /// Base point `c_1` in local order.
    pub fn base_point(&self) -> Vec<C64> {
        self.order.iter().map(|&o| cr(self.base[o])).collect()
    }

    fn to_native(&self, w: &[C64]) -> Result<Vec<C64>> {
        if w.len() != self.dim() {
            return Err(Error::WrongShape(format!(
                "deformation has dimension {}, got {}",
                self.dim(),
                w.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); w.len()];
        for (j, &o) in self.order.iter().enumerate() {
            out[o] = w[j];
        }
        Ok(out)
    }

    fn to_local(&self, v: Vec<C64>) -> Vec<C64> {
        self.order.iter().map(|&o| v[o]).collect()
    }

    /// `G_w(z)` on the branch through `anchor`.
    pub fn g(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<C64> {
        Ok(self.eval_native(&self.to_native(w)?, z, anchor)?.0)
    }

    /// `dG_w/dz`.
    pub fn dg_dz(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<C64> {
        Ok(self.eval_native(&self.to_native(w)?, z, anchor)?.1)
    }

    /// `dG_w(z)/dw_k` for each local k.
    pub fn dg_dw(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<Vec<C64>> {
        let native = self.eval_native(&self.to_native(w)?, z, anchor)?.2;
        Ok(self.to_local(native))
    }

    /// `(G, dG/dz, dG/dw)` in one go, local order.
    pub fn g_full(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<(C64, C64, Vec<C64>)> {
        let (g, dz, dw) = self.eval_native(&self.to_native(w)?, z, anchor)?;
        Ok((g, dz, self.to_local(dw)))
    }

    /// `p_j(w)`, local order.
    pub fn p(&self, w: &[C64]) -> Result<Vec<C64>> {
        let (p, _) = self.p_native(&self.to_native(w)?)?;
        Ok(self.to_local(p))
    }

    /// `dp_j/dw_k`, local order in both indices.
    pub fn dp_dw(&self, w: &[C64]) -> Result<CMatrix> {
        let (_, dp) = self.p_native(&self.to_native(w)?)?;
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                m[(j, k)] = dp[(self.order[j], self.order[k])];
            }
        }
        Ok(m)
    }

    fn anchor_is_left(anchor: SidedPoint, cut: f64) -> bool {
        anchor.value < cut || (anchor.value == cut && anchor.side == Side::Minus)
    }

    fn eval_native(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<(C64, C64, Vec<C64>)> {
        let one = cr(1.0);
        let zero = cr(0.0);
        match self.family.kind() {
            FamilyKind::PowerUnimodal { d } => {
                let d = *d as i32;
                Ok((z.powi(d) + w[0], z.powi(d - 1) * d as f64, vec![one]))
            }
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } => {
                if Self::anchor_is_left(anchor, 0.0) {
                    let u = -z;
                    let g = cpow(u, *ell_minus) + w[0];
                    let dz = -cpow(u, ell_minus - 1.0) * *ell_minus;
                    Ok((g, dz, vec![one]))
                } else {
                    let g = cpow(z, *ell_plus) + w[0];
                    let dz = cpow(z, ell_plus - 1.0) * *ell_plus;
                    Ok((g, dz, vec![one]))
                }
            }
            FamilyKind::FlatExp { ell, b } => {
                let (e, de) = flat_c(*b, *ell, z, Self::anchor_is_left(anchor, 0.0));
                Ok((e + w[0], de, vec![one]))
            }
            FamilyKind::MultiplicativeClassE { core } => {
                let f = core.eval_c(z);
                Ok((w[0] * f, w[0] * core.deriv_c(z), vec![f]))
            }
            FamilyKind::PiecewiseLinear { .. } => self.pl_eval(w, z, anchor),
            FamilyKind::LorenzAffine => {
                let t = 1.0 + (w[0] - w[1]) / 2.0;
                let p = (w[0] + w[1]) / (t * 2.0);
                let dt = [cr(0.5), cr(-0.5)];
                let left = Self::anchor_is_left(anchor, self.params[1]);
                let idx = if left { 0 } else { 1 };
                let g = w[idx] + t * (z - p);
                let dw = (0..2)
                    .map(|k| {
                        let dp = 1.0 / (t * 2.0) - p / t * dt[k];
                        let direct = if k == idx { one } else { zero };
                        direct + dt[k] * (z - p) - t * dp
                    })
                    .collect();
                Ok((g, t, dw))
            }
            FamilyKind::LorenzFlat { ell, b } => {
                let left = Self::anchor_is_left(anchor, 0.0);
                let (e, de) = flat_c(*b, *ell, z, left);
                if left {
                    Ok((w[0] - e, -de, vec![one, zero]))
                } else {
                    Ok((w[1] + e, de, vec![zero, one]))
                }
            }
            FamilyKind::Arnold { .. } => {
                let st = self.arnold_state(w)?;
                let base = self.arnold.as_ref().unwrap();
                let x = anchor.value;
                let raw = base.d * x + base.a + base.b * (2.0 * PI * x).sin();
                let k = raw.floor();
                let s = (z * 2.0 * PI).sin();
                let g = z * base.d + st.a + st.b * s - k;
                let dz = st.b * (z * 2.0 * PI).cos() * 2.0 * PI + base.d;
                let dw = (0..2).map(|m| st.jac[0][m] + st.jac[1][m] * s).collect();
                Ok((g, dz, dw))
            }
        }
    }

    fn p_native(&self, w: &[C64]) -> Result<(Vec<C64>, CMatrix)> {
        let n = self.dim();
        match self.family.kind() {
            FamilyKind::PowerUnimodal { .. }
            | FamilyKind::PowerLaw { .. }
            | FamilyKind::FlatExp { .. }
            | FamilyKind::LorenzFlat { .. }
            | FamilyKind::MultiplicativeClassE { .. } => {
                let p = self.marked.iter().map(|m| cr(m.value)).collect();
                Ok((p, CMatrix::zeros(n, n)))
            }
            FamilyKind::PiecewiseLinear { .. } => {
                let (p, dp) = self.pl_p(w);
                let mut m = CMatrix::zeros(n, n);
                for j in 0..n {
                    for k in 0..n {
                        m[(j, k)] = dp[j + 1][k];
                    }
                }
                Ok((p[1..=n].to_vec(), m))
            }
            FamilyKind::LorenzAffine => {
                let t = 1.0 + (w[0] - w[1]) / 2.0;
                let p = (w[0] + w[1]) / (t * 2.0);
                let dt = [cr(0.5), cr(-0.5)];
                let dp: Vec<C64> = (0..2).map(|k| 1.0 / (t * 2.0) - p / t * dt[k]).collect();
                let mut m = CMatrix::zeros(2, 2);
                for j in 0..2 {
                    for k in 0..2 {
                        m[(j, k)] = dp[k];
                    }
                }
                Ok((vec![p, p], m))
            }
            FamilyKind::Arnold { .. } => {
                let st = self.arnold_state(w)?;
                let mut m = CMatrix::zeros(2, 2);
                for j in 0..2 {
                    for k in 0..2 {
                        m[(j, k)] = st.jac[2 + j][k];
                    }
                }
                Ok((st.e.to_vec(), m))
            }
        }
    }

    /// PL data at complex `w`: `S`, extended `w_0..w_{nu+1}`, `p_0..p_{nu+1}`
    /// and their w-derivatives.
    fn pl_p(&self, w: &[C64]) -> (Vec<C64>, Vec<Vec<C64>>) {
        let pl = self.pl.as_ref().unwrap();
        let nu = pl.nu();
        let r = |m: usize| pl.eps(m) / pl.kappa[m - 1];
        let ext = pl_extended(pl, w);
        let s: C64 = (1..=nu + 1).map(|i| (ext[i] - ext[i - 1]) * r(i)).sum::<C64>() / 2.0;
        let ds: Vec<f64> = (1..=nu).map(|k| (r(k) - r(k + 1)) / 2.0).collect();
        let mut p = vec![cr(-1.0)];
        let mut dp = vec![vec![cr(0.0); nu]];
        let mut num = cr(0.0);
        let mut dnum = vec![0.0; nu];
        for j in 1..=nu + 1 {
            num += (ext[j] - ext[j - 1]) * r(j);
            // d/dw_k of (w_j - w_{j-1}): +1 at k = j, -1 at k = j-1
            if j <= nu {
                dnum[j - 1] += r(j);
            }
            if j >= 2 {
                dnum[j - 2] -= r(j);
            }
            p.push(num / s - 1.0);
            dp.push(
                (0..nu)
                    .map(|k| (s * dnum[k] - num * ds[k]) / (s * s))
                    .collect(),
            );
        }
        (p, dp)
    }

    fn pl_eval(&self, w: &[C64], z: C64, anchor: SidedPoint) -> Result<(C64, C64, Vec<C64>)> {
        let pl = self.pl.as_ref().unwrap();
        let nu = pl.nu();
        let side = if anchor.side == Side::TwoSided {
            Side::Minus
        } else {
            anchor.side
        };
        let i = pl.branch(anchor.value, side).unwrap();
        let r = |m: usize| pl.eps(m) / pl.kappa[m - 1];
        let ext = pl_extended(pl, w);
        let s: C64 = (1..=nu + 1).map(|m| (ext[m] - ext[m - 1]) * r(m)).sum::<C64>() / 2.0;
        let (p, dp) = self.pl_p(w);
        let slope = s * pl.eps(i) * pl.kappa[i - 1];
        let g = ext[i - 1] + slope * (z - p[i - 1]);
        let dw = (1..=nu)
            .map(|k| {
                let ds = (r(k) - r(k + 1)) / 2.0;
                let direct = if k == i - 1 { 1.0 } else { 0.0 };
                cr(direct)
                    + (z - p[i - 1]) * ds * pl.eps(i) * pl.kappa[i - 1]
                    - slope * dp[i - 1][k - 1]
            })
            .collect();
        Ok((g, slope, dw))
    }

    fn arnold_residual(base: &ArnoldBase, u: &[C64; 4], w: &[C64]) -> [C64; 4] {
        let tp = 2.0 * PI;
        let [a, b, e1, e2] = *u;
        [
            b * (e1 * tp).cos() * tp + base.d,
            b * (e2 * tp).cos() * tp + base.d,
            e1 * base.d + a + b * (e1 * tp).sin() - base.k[0] - w[0],
            e2 * base.d + a + b * (e2 * tp).sin() - base.k[1] - w[1],
        ]
    }

    fn arnold_du(base: &ArnoldBase, u: &[C64; 4]) -> CMatrix {
        let tp = 2.0 * PI;
        let [_, b, e1, e2] = *u;
        let z = cr(0.0);
        CMatrix::from_rows(vec![
            vec![z, (e1 * tp).cos() * tp, -b * (e1 * tp).sin() * tp * tp, z],
            vec![z, (e2 * tp).cos() * tp, z, -b * (e2 * tp).sin() * tp * tp],
            vec![cr(1.0), (e1 * tp).sin(), b * (e1 * tp).cos() * tp + base.d, z],
            vec![cr(1.0), (e2 * tp).sin(), z, b * (e2 * tp).cos() * tp + base.d],
        ])
    }

    fn arnold_jacobian_check(&self) -> Result<()> {
        let base = self.arnold.as_ref().unwrap();
        let u = [cr(base.a), cr(base.b), cr(base.e[0]), cr(base.e[1])];
        let lu = Lu::new(&Self::arnold_du(base, &u));
        // (a, b) -> (v1, v2) has Jacobian [[1, sin 2pi e1], [1, sin 2pi e2]]
        let det = (2.0 * PI * base.e[1]).sin() - (2.0 * PI * base.e[0]).sin();
        if lu.pivot_ratio() < 1e-12 || det.abs() < 1e-12 {
            return Err(Error::DegenerateDeformation(format!(
                "critical value map is singular at (a, b) = ({}, {})",
                base.a, base.b
            )));
        }
        Ok(())
    }

    fn arnold_state(&self, w: &[C64]) -> Result<ArnoldState> {
        let base = self.arnold.as_ref().unwrap();
        let mut u = [cr(base.a), cr(base.b), cr(base.e[0]), cr(base.e[1])];
        let mut converged = false;
        for _ in 0..60 {
            let f = Self::arnold_residual(base, &u, w);
            let norm = f.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if norm < 1e-14 {
                converged = true;
                break;
            }
            let lu = Lu::new(&Self::arnold_du(base, &u));
            let step = lu.solve(&f)?;
            for i in 0..4 {
                u[i] -= step[i];
            }
        }
        if !converged {
            let f = Self::arnold_residual(base, &u, w);
            if f.iter().map(|x| x.norm()).fold(0.0, f64::max) > 1e-11 {
                return Err(Error::DegenerateDeformation(
                    "Arnold critical-value system did not converge".into(),
                ));
            }
        }
        let lu = Lu::new(&Self::arnold_du(base, &u));
        let mut jac = [[cr(0.0); 2]; 4];
        for m in 0..2 {
            // dF/dw_m = -e_{2+m}, so du/dw_m = F_u^{-1} e_{2+m}
            let mut rhs = vec![cr(0.0); 4];
            rhs[2 + m] = cr(1.0);
            let col = lu.solve(&rhs)?;
            for i in 0..4 {
                jac[i][m] = col[i];
            }
        }
        Ok(ArnoldState {
            a: u[0],
            b: u[1],
            e: [u[2], u[3]],
            jac,
        })
    }
}

fn pl_extended(pl: &PlSpec, w: &[C64]) -> Vec<C64> {
    let nu = pl.nu();
    let mut ext = Vec::with_capacity(nu + 2);
    ext.push(cr(-pl.eps(1)));
    ext.extend_from_slice(w);
    ext.push(cr(pl.eps(nu + 1)));
    ext
}

/// `b exp(-1/u^l)` and its z-derivative, with `u = z` on the right branch and
/// `u = -z` on the left.
fn flat_c(b: f64, ell: f64, z: C64, left: bool) -> (C64, C64) {
    let (u, du) = if left { (-z, -1.0) } else { (z, 1.0) };
    let e = (-cpow(u, -ell)).exp() * b;
    let de = e * ell * cpow(u, -ell - 1.0) * du;
    (e, de)
}
