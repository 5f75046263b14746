//! Marked orbits, the relation map `R`, its Jacobian, the matrix `D(rho)`
//! and the oriented transversality quotient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Deformation, FamilySpec, SidedPoint};
use crate::linalg::{self, CMatrix, C64};

pub const MAX_ORBIT: usize = 4096;
pub const ZERO_DET_TOL: f64 = 1e-10;

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// How a critical orbit closes up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `g^q(c_{0,j}) = c_{0,mu}` (local index).
    FirstKind { mu: usize },
    /// `g^q(c_{0,j}) = g^l(c_{0,j})`.
    SecondKind { l: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalOrbit {
    /// `c_{0,j}, ..., c_{q_j,j}`; the last entry is the landing point.
    pub points: Vec<SidedPoint>,
    pub q: usize,
    pub relation: Relation,
    /// `Dg(c_{i,j})` for `0 <= i < q`; entry 0 is 0 by convention.
    pub derivs: Vec<f64>,
    /// `Dg^n(c_{1,j})` for `0 <= n < q`.
    pub deriv_products: Vec<f64>,
}

impl CriticalOrbit {
    /// `Dg^{q-l}(c_{l,j})` for second-kind orbits.
    pub fn cycle_multiplier(&self) -> Option<f64> {
        match self.relation {
            Relation::SecondKind { l } => {
                Some(self.deriv_products[self.q - 1] / self.deriv_products[l - 1])
            }
            Relation::FirstKind { .. } => None,
        }
    }
}

/// Finite forward-invariant set generated by the critical points, with its
/// combinatorics. First-kind orbits come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedOrbit {
    pub family: FamilySpec,
    pub params: Vec<f64>,
    pub orbits: Vec<CriticalOrbit>,
    /// Number of first-kind orbits.
    pub r: usize,
    /// Native critical-point index of each local orbit.
    pub order: Vec<usize>,
}

impl MarkedOrbit {
    pub fn nu(&self) -> usize {
        self.orbits.len()
    }

    /// The family's deformation with coordinates in this orbit's labelling.
    pub fn deformation(&self) -> Result<Deformation> {
        Deformation::new(&self.family, &self.params)?.reordered(&self.order)
    }

    /// Critical values `c_{1,j}`.
    pub fn c1(&self) -> Vec<f64> {
        self.orbits.iter().map(|o| o.points[1].value).collect()
    }

    /// `prod_j Dg^{q_j-1}(c_{1,j})`.
    pub fn derivative_product(&self) -> f64 {
        self.orbits.iter().map(|o| o.deriv_products[o.q - 1]).product()
    }

    /// Assembles an orbit from explicit data, e.g. for synthetic fixtures.
    /// Orbits must already list first-kind relations first.
    pub fn from_parts(
        family: FamilySpec,
        params: Vec<f64>,
        orbits: Vec<CriticalOrbit>,
        order: Vec<usize>,
    ) -> Result<Self> {
        let r = orbits
            .iter()
            .take_while(|o| matches!(o.relation, Relation::FirstKind { .. }))
            .count();
        if orbits[r..]
            .iter()
            .any(|o| matches!(o.relation, Relation::FirstKind { .. }))
        {
            return Err(Error::WrongShape("first-kind orbits must come first".into()));
        }
        if order.len() != orbits.len() {
            return Err(Error::WrongShape("order and orbits differ in length".into()));
        }
        for o in &orbits {
            if o.points.len() != o.q + 1 || o.derivs.len() != o.q || o.deriv_products.len() != o.q {
                return Err(Error::WrongShape("inconsistent orbit lengths".into()));
            }
            match o.relation {
                Relation::FirstKind { mu } if mu >= orbits.len() => {
                    return Err(Error::WrongShape(format!("mu = {mu} out of range")))
                }
                Relation::SecondKind { l } if l == 0 || l >= o.q => {
                    return Err(Error::WrongShape(format!("l = {l} with q = {}", o.q)))
                }
                _ => {}
            }
        }
        Ok(MarkedOrbit {
            family,
            params,
            orbits,
            r,
            order,
        })
    }
}

/// Distance on the line, or on the circle for circle families.
pub(crate) fn point_distance(family: &FamilySpec, x: f64, y: f64) -> f64 {
    if family.is_circle() {
        let d = (x - y).rem_euclid(1.0);
        d.min(1.0 - d)
    } else {
        (x - y).abs()
    }
}

/// Follows every critical orbit until it lands on a marked point (first kind)
/// or on an earlier point of itself (second kind).
pub fn marked_orbit(family: &FamilySpec, params: &[f64], tol: f64) -> Result<MarkedOrbit> {
    let crit = family.critical_data(params)?;
    let marked: Vec<SidedPoint> = crit.iter().map(|c| c.point).collect();
    let mut native = Vec::with_capacity(crit.len());
    for c in &crit {
        let mut pts = vec![c.point, SidedPoint::new(c.value)];
        let relation = loop {
            let n = pts.len() - 1;
            let x = pts[n].value;
            if let Some(k) = marked
                .iter()
                .position(|m| point_distance(family, x, m.value) < tol)
            {
                // landing on a discontinuity: keep the side of the marked point
                pts[n] = marked[k];
                break Relation::FirstKind { mu: k };
            }
            if let Some(l) = (1..n).find(|&l| point_distance(family, x, pts[l].value) < tol) {
                break Relation::SecondKind { l };
            }
            if n >= MAX_ORBIT {
                return Err(Error::OrbitNotFinite { index: native.len(), cap: MAX_ORBIT });
            }
            let y = family.eval_unchecked(params, pts[n])?;
            if !y.is_finite() {
                return Err(Error::OrbitLeftDomain { step: n + 1, x: y });
            }
            pts.push(SidedPoint::new(y));
        };
        let q = pts.len() - 1;
        let mut derivs = vec![0.0; q];
        let mut deriv_products = vec![1.0; q];
        for i in 1..q {
            let d = family.d_dx_unchecked(params, pts[i])?;
            if d.abs() < tol {
                return Err(Error::TangentOrbit { index: i, x: pts[i].value });
            }
            derivs[i] = d;
            deriv_products[i] = deriv_products[i - 1] * d;
        }
        if deriv_products.iter().any(|d| !d.is_finite()) {
            return Err(Error::Diverged("derivative product overflowed".into()));
        }
        native.push(CriticalOrbit {
            points: pts,
            q,
            relation,
            derivs,
            deriv_products,
        });
    }
    // first kind first, stable in native order
    let mut order: Vec<usize> = (0..native.len())
        .filter(|&j| matches!(native[j].relation, Relation::FirstKind { .. }))
        .collect();
    let r = order.len();
    order.extend((0..native.len()).filter(|&j| matches!(native[j].relation, Relation::SecondKind { .. })));
    let mut local_of = vec![0; native.len()];
    for (loc, &nat) in order.iter().enumerate() {
        local_of[nat] = loc;
    }
    let orbits = order
        .iter()
        .map(|&nat| {
            let mut o = native[nat].clone();
            if let Relation::FirstKind { mu } = o.relation {
                o.relation = Relation::FirstKind { mu: local_of[mu] };
            }
            o
        })
        .collect();
    Ok(MarkedOrbit {
        family: family.clone(),
        params: params.to_vec(),
        orbits,
        r,
        order,
    })
}

/// `R(w)`: first kind `G^{q-1}(w_j) - p_mu(w)`, second kind
/// `G^{q-1}(w_j) - G^{l-1}(w_j)`.
pub fn r_map(orbit: &MarkedOrbit, def: &Deformation, w: &[C64]) -> Result<Vec<C64>> {
    Ok(r_with_jacobian(orbit, def, w, false)?.0)
}

/// Chain-rule Jacobian of `R` at the base point.
pub fn jacobian_r(orbit: &MarkedOrbit, def: &Deformation) -> Result<CMatrix> {
    let c1: Vec<C64> = orbit.c1().into_iter().map(cr).collect();
    Ok(r_with_jacobian(orbit, def, &c1, true)?.1)
}

/// `R(w)` and, on request, its Jacobian at `w`.
pub fn r_with_jacobian(
    orbit: &MarkedOrbit,
    def: &Deformation,
    w: &[C64],
    want_jac: bool,
) -> Result<(Vec<C64>, CMatrix)> {
    let nu = orbit.nu();
    if w.len() != nu || def.dim() != nu {
        return Err(Error::WrongShape(format!("expected {nu} coordinates")));
    }
    let p = def.p(w)?;
    let dp = if want_jac { def.dp_dw(w)? } else { CMatrix::zeros(nu, nu) };
    let mut value = vec![C64::new(0.0, 0.0); nu];
    let mut jac = CMatrix::zeros(nu, nu);
    for (j, o) in orbit.orbits.iter().enumerate() {
        let mut z = w[j];
        let mut dz: Vec<C64> = (0..nu).map(|k| cr(if k == j { 1.0 } else { 0.0 })).collect();
        // iterates G^{n-1}(w_j) for n = 1..q
        let mut history = vec![(z, dz.clone())];
        for n in 1..o.q {
            let (g, gz, gw) = def.g_full(w, z, o.points[n])?;
            if !g.re.is_finite() || !g.im.is_finite() {
                return Err(Error::OrbitLeftDomain { step: n, x: g.re });
            }
            if want_jac {
                for k in 0..nu {
                    dz[k] = gz * dz[k] + gw[k];
                }
            }
            z = g;
            history.push((z, dz.clone()));
        }
        match o.relation {
            Relation::FirstKind { mu } => {
                value[j] = z - p[mu];
                for k in 0..nu {
                    jac[(j, k)] = dz[k] - dp[(mu, k)];
                }
            }
            Relation::SecondKind { l } => {
                let (zl, dzl) = &history[l - 1];
                value[j] = z - zl;
                for k in 0..nu {
                    jac[(j, k)] = dz[k] - dzl[k];
                }
            }
        }
    }
    Ok((value, jac))
}

/// `sum_{n=0}^{q-1} 1 / Df^n(c_1)` for a single additive first-kind orbit.
pub fn trans_sum(orbit: &MarkedOrbit) -> Result<f64> {
    if orbit.nu() != 1 || !orbit.family.is_additive() {
        return Err(Error::WrongShape(
            "trans_sum needs one critical point of an additive family".into(),
        ));
    }
    let o = &orbit.orbits[0];
    if !matches!(o.relation, Relation::FirstKind { .. }) {
        return Err(Error::WrongShape("trans_sum needs a periodic critical point".into()));
    }
    Ok(o.deriv_products.iter().map(|d| 1.0 / d).sum())
}

/// Same sum without the shape checks, for multiplicative families where the
/// relation is `f^q(c) = c`.
pub fn orbit_sum(orbit: &CriticalOrbit) -> f64 {
    orbit.deriv_products.iter().map(|d| 1.0 / d).sum()
}

/// Oriented transversality quotient `det DR(c_1) / prod_j Dg^{q_j-1}(c_{1,j})`.
/// Returns `(quotient > 0, quotient)`; a vanishing quotient is an error.
pub fn positively_oriented(orbit: &MarkedOrbit, def: &Deformation) -> Result<(bool, f64)> {
    let q = oriented_quotient(orbit, def)?;
    if q.abs() < ZERO_DET_TOL {
        return Err(Error::ZeroDeterminant(q));
    }
    Ok((q > 0.0, q))
}

/// The quotient without the zero test.
pub fn oriented_quotient(orbit: &MarkedOrbit, def: &Deformation) -> Result<f64> {
    let jac = jacobian_r(orbit, def)?;
    let det = linalg::det(&jac);
    Ok(det.re / orbit.derivative_product())
}

/// First-order data of a deformation along a marked orbit: the ingredients of
/// `D(rho)` and of the transfer operators.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedTriple {
    /// `Dg(c_{i,j})`, `1 <= i < q_j` (index 0 unused).
    pub dg: Vec<Vec<C64>>,
    /// `L_k(c_{i,j})`, `1 <= i < q_j` (index 0 unused).
    pub l: Vec<Vec<Vec<C64>>>,
    /// `dp_j / dw_k` at the base point.
    pub p: CMatrix,
}

impl LinearizedTriple {
    pub fn new(orbit: &MarkedOrbit, def: &Deformation) -> Result<Self> {
        let nu = orbit.nu();
        let c1: Vec<C64> = orbit.c1().into_iter().map(cr).collect();
        let mut dg = Vec::with_capacity(nu);
        let mut l = Vec::with_capacity(nu);
        for o in &orbit.orbits {
            let mut dgj = vec![C64::new(0.0, 0.0); o.q];
            let mut lj = vec![vec![C64::new(0.0, 0.0); nu]; o.q];
            for i in 1..o.q {
                let pt = o.points[i];
                let (_, gz, gw) = def.g_full(&c1, cr(pt.value), pt)?;
                dgj[i] = gz;
                lj[i] = gw;
            }
            dg.push(dgj);
            l.push(lj);
        }
        Ok(LinearizedTriple {
            dg,
            l,
            p: def.dp_dw(&c1)?,
        })
    }

    /// Triple of the map composed with the contraction by `1 - xi`: orbit
    /// derivatives scale by `1 - xi`, derivatives of `p` by `(1 - xi)^{-1}`.
    pub fn scaled(&self, xi: f64) -> Self {
        let s = 1.0 - xi;
        LinearizedTriple {
            dg: self
                .dg
                .iter()
                .map(|d| d.iter().map(|x| x * s).collect())
                .collect(),
            l: self.l.clone(),
            p: self.p.scale(cr(1.0 / s)),
        }
    }

    /// `Dg^n(c_{1,j})` for `0 <= n < q_j`.
    fn products(&self, j: usize) -> Vec<C64> {
        let mut out = vec![cr(1.0)];
        for i in 1..self.dg[j].len() {
            let last = out[i - 1];
            out.push(last * self.dg[j][i]);
        }
        out
    }
}

/// `D(rho)` from a linearized triple.
pub fn d_rho_from(orbit: &MarkedOrbit, t: &LinearizedTriple, rho: C64) -> CMatrix {
    let nu = orbit.nu();
    let mut d = CMatrix::identity(nu);
    for (j, o) in orbit.orbits.iter().enumerate() {
        let prods = t.products(j);
        // partial sums L^m for m = 0..q-1
        let mut partial = vec![vec![C64::new(0.0, 0.0); nu]];
        let mut rho_n = cr(1.0);
        for n in 1..o.q {
            rho_n *= rho;
            let prev = partial[n - 1].clone();
            partial.push(
                (0..nu)
                    .map(|k| prev[k] + rho_n * t.l[j][n][k] / prods[n])
                    .collect(),
            );
        }
        let full = &partial[o.q - 1];
        for k in 0..nu {
            let delta = if j == k { cr(1.0) } else { cr(0.0) };
            let tail = match o.relation {
                Relation::FirstKind { mu } => {
                    rho.powu(o.q as u32) * t.p[(mu, k)] / prods[o.q - 1]
                }
                Relation::SecondKind { l } => {
                    let mult = prods[o.q - 1] / prods[l - 1];
                    rho.powu((o.q - l) as u32) / mult * (partial[l - 1][k] + delta)
                }
            };
            d[(j, k)] = delta + full[k] - tail;
        }
    }
    d
}

pub fn d_rho(orbit: &MarkedOrbit, def: &Deformation, rho: C64) -> Result<CMatrix> {
    Ok(d_rho_from(orbit, &LinearizedTriple::new(orbit, def)?, rho))
}

/// Roots of `rho^{q_j-l_j} = Dg^{q_j-l_j}(c_{l_j,j})` over pairs of
/// second-kind orbits that land on the same point.
pub fn exceptional_values(orbit: &MarkedOrbit) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for j in orbit.r..orbit.nu() {
        for jp in j + 1..orbit.nu() {
            let (a, b) = (&orbit.orbits[j], &orbit.orbits[jp]);
            let (la, lb) = (a.points[a.q].value, b.points[b.q].value);
            if point_distance(&orbit.family, la, lb) > orbit.family.closure_tol() {
                continue;
            }
            let (Relation::SecondKind { l }, Some(mult)) = (a.relation, a.cycle_multiplier()) else {
                continue;
            };
            let m = a.q - l;
            let root = cr(mult).powf(1.0 / m as f64);
            for s in 0..m {
                let z = root * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * s as f64 / m as f64);
                if !out.iter().any(|e| (e - z).norm() < 1e-9 * (1.0 + z.norm())) {
                    out.push(z);
                }
            }
        }
    }
    linalg::sort_by_modulus(&mut out);
    out
}

/// Report of the transversality computations for one marked orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformationMatrices {
    pub nu: usize,
    pub r: usize,
    pub q: Vec<usize>,
    pub relations: Vec<Relation>,
    pub r_jacobian: Vec<Vec<(f64, f64)>>,
    pub det_jacobian: f64,
    pub det_d1: (f64, f64),
    pub derivative_product: f64,
    pub quotient: f64,
    pub exceptional: Vec<(f64, f64)>,
}

pub fn deformation_matrices(orbit: &MarkedOrbit, def: &Deformation) -> Result<DeformationMatrices> {
    let jac = jacobian_r(orbit, def)?;
    let det_j = linalg::det(&jac);
    let d1 = linalg::det(&d_rho(orbit, def, cr(1.0))?);
    let prod = orbit.derivative_product();
    Ok(DeformationMatrices {
        nu: orbit.nu(),
        r: orbit.r,
        q: orbit.orbits.iter().map(|o| o.q).collect(),
        relations: orbit.orbits.iter().map(|o| o.relation).collect(),
        r_jacobian: (0..jac.rows())
            .map(|i| jac.row(i).iter().map(|z| (z.re, z.im)).collect())
            .collect(),
        det_jacobian: det_j.re,
        det_d1: (d1.re, d1.im),
        derivative_product: prod,
        quotient: det_j.re / prod,
        exceptional: exceptional_values(orbit).iter().map(|z| (z.re, z.im)).collect(),
    })
}
