//! Parametric interval-map families, their derivatives and critical data.

mod core_map;
mod deformation;

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

pub use core_map::CoreMap;
pub use deformation::Deformation;

use crate::error::{Error, Result};
use crate::plmaps::PlSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
    TwoSided,
}

/// A real point together with the side it is approached from. Only matters
/// at discontinuities (Lorenz kinds) and turning points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidedPoint {
    pub value: f64,
    pub side: Side,
}

impl SidedPoint {
    pub fn new(value: f64) -> Self {
        SidedPoint {
            value,
            side: Side::TwoSided,
        }
    }

    pub fn plus(value: f64) -> Self {
        SidedPoint {
            value,
            side: Side::Plus,
        }
    }

    pub fn minus(value: f64) -> Self {
        SidedPoint {
            value,
            side: Side::Minus,
        }
    }

    pub fn label(&self) -> String {
        match self.side {
            Side::TwoSided => format!("{}", self.value),
            Side::Plus => format!("{}+", self.value),
            Side::Minus => format!("{}-", self.value),
        }
    }
}

impl From<f64> for SidedPoint {
    fn from(x: f64) -> Self {
        SidedPoint::new(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// `x^d + c`, d even.
    PowerUnimodal { d: u32 },
    /// `|x|^{l-} + c` for x < 0 and `|x|^{l+} + c` for x >= 0.
    PowerLaw { ell_minus: f64, ell_plus: f64 },
    /// `b exp(-1/|x|^l) + c`, with value c at 0.
    FlatExp { ell: f64, b: f64 },
    /// `a f(x)` for a core map f.
    MultiplicativeClassE { core: CoreMap },
    /// Continuous piecewise-linear maps of [-1,1] with slopes `eps_i kappa_i s`,
    /// parametrised by their turning values.
    PiecewiseLinear {
        epsilon: i8,
        nu: usize,
        kappa: Vec<f64>,
    },
    /// `tx + (t-1)` left of c, `tx - (t-1)` right of c; params (t, c).
    LorenzAffine,
    /// `-b e^{-1/|x|^l} + c1` for x < 0 and `b e^{-1/|x|^l} + c2` for x > 0.
    LorenzFlat { ell: f64, b: f64 },
    /// Circle map `dt + a + b sin(2 pi t) mod 1`; params (a, b).
    Arnold { d: u32 },
}

/// One turning point (or discontinuity side) with its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: SidedPoint,
    pub value: f64,
    /// Local order on the left and right (2 for quadratic, 1 for corners and
    /// jumps). Infinite for flat points.
    pub order: [f64; 2],
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    kind: FamilyKind,
}

fn flat_term(b: f64, ell: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        b * (-x.abs().powf(-ell)).exp()
    }
}

fn flat_term_deriv(b: f64, ell: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let e = (-ax.powf(-ell)).exp();
    b * e * ell * ax.powf(-ell - 1.0) * x.signum()
}

/// `x^l` with an exact integer power when possible.
pub(crate) fn pow_real(x: f64, ell: f64) -> f64 {
    if ell.fract() == 0.0 && ell.abs() < 1e6 {
        x.powi(ell as i32)
    } else {
        x.powf(ell)
    }
}

impl FamilySpec {
    pub fn new(kind: FamilyKind) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidFamily(m));
        match &kind {
            FamilyKind::PowerUnimodal { d } => {
                if *d < 2 || d % 2 != 0 {
                    return bad(format!("degree {d} must be an even integer >= 2"));
                }
            }
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } => {
                if !(*ell_minus >= 1.0 && *ell_plus >= 1.0) {
                    return bad("power-law exponents must be >= 1".into());
                }
            }
            FamilyKind::FlatExp { ell, b } | FamilyKind::LorenzFlat { ell, b } => {
                if !(*ell >= 1.0) {
                    return bad(format!("flat order {ell} must be >= 1"));
                }
                let min_b = 2.0 * (E * ell).powf(1.0 / ell);
                if !(*b > min_b) {
                    return bad(format!("b = {b} must exceed 2(e l)^(1/l) = {min_b}"));
                }
            }
            FamilyKind::MultiplicativeClassE { .. } => {}
            FamilyKind::PiecewiseLinear { epsilon, nu, kappa } => {
                if *epsilon != 1 && *epsilon != -1 {
                    return bad("epsilon must be +1 or -1".into());
                }
                if *nu < 1 {
                    return bad("nu must be >= 1".into());
                }
                if kappa.len() != nu + 1 {
                    return bad(format!("kappa needs {} entries", nu + 1));
                }
                if kappa.iter().any(|&k| !(k > 0.0)) {
                    return bad("kappa entries must be positive".into());
                }
            }
            FamilyKind::LorenzAffine => {}
            FamilyKind::Arnold { d } => {
                if *d < 1 {
                    return bad("Arnold degree must be >= 1".into());
                }
            }
        }
        Ok(FamilySpec { kind })
    }

    pub fn quadratic() -> Self {
        FamilySpec::new(FamilyKind::PowerUnimodal { d: 2 }).unwrap()
    }

    pub fn tent() -> Self {
        FamilySpec::new(FamilyKind::PiecewiseLinear {
            epsilon: 1,
            nu: 1,
            kappa: vec![1.0, 1.0],
        })
        .unwrap()
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::PowerUnimodal { .. } => "PowerUnimodal",
            FamilyKind::PowerLaw { .. } => "PowerLaw",
            FamilyKind::FlatExp { .. } => "FlatExp",
            FamilyKind::MultiplicativeClassE { .. } => "MultiplicativeClassE",
            FamilyKind::PiecewiseLinear { .. } => "PiecewiseLinear",
            FamilyKind::LorenzAffine => "LorenzAffine",
            FamilyKind::LorenzFlat { .. } => "LorenzFlat",
            FamilyKind::Arnold { .. } => "Arnold",
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::PiecewiseLinear { nu, .. } => *nu,
            FamilyKind::LorenzAffine | FamilyKind::LorenzFlat { .. } | FamilyKind::Arnold { .. } => 2,
            _ => 1,
        }
    }

    /// Families `f + c` where the parameter is a pure translation.
    pub fn is_additive(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::PowerUnimodal { .. } | FamilyKind::PowerLaw { .. } | FamilyKind::FlatExp { .. }
        )
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, FamilyKind::Arnold { .. })
    }

    pub fn is_lorenz(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::LorenzAffine | FamilyKind::LorenzFlat { .. }
        )
    }

    /// Default tolerance for deciding that an orbit has closed up.
    pub fn closure_tol(&self) -> f64 {
        match self.kind {
            FamilyKind::FlatExp { .. } | FamilyKind::LorenzFlat { .. } => 1e-7,
            _ => 1e-9,
        }
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_dim() {
            return Err(Error::WrongShape(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.param_dim(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        match &self.kind {
            FamilyKind::LorenzAffine => {
                let (t, c) = (params[0], params[1]);
                if !(t > 1.0 && t <= 2.0 && c > -1.0 && c < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "LorenzAffine needs t in (1,2] and c in (-1,1), got ({t}, {c})"
                    )));
                }
            }
            FamilyKind::Arnold { d } => {
                if !(params[1].abs() > *d as f64 / (2.0 * PI)) {
                    return Err(Error::InvalidArgument(format!(
                        "Arnold needs |b| > d/(2 pi), got b = {}",
                        params[1]
                    )));
                }
            }
            FamilyKind::PiecewiseLinear { .. } => {
                self.pl_spec(params)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub(crate) fn pl_spec(&self, params: &[f64]) -> Result<PlSpec> {
        match &self.kind {
            FamilyKind::PiecewiseLinear { epsilon, kappa, .. } => {
                PlSpec::from_values(*epsilon, kappa.clone(), params.to_vec())
            }
            _ => Err(Error::Unsupported(format!("{} is not piecewise linear", self.name()))),
        }
    }

    /// Point where the map is discontinuous, if any.
    pub fn discontinuity(&self, params: &[f64]) -> Option<f64> {
        match self.kind {
            FamilyKind::LorenzAffine => Some(params[1]),
            FamilyKind::LorenzFlat { .. } => Some(0.0),
            _ => None,
        }
    }

    /// Reference point for itinerary symbols: the turning point of unimodal
    /// kinds, the discontinuity of Lorenz kinds.
    pub fn turning_point(&self, params: &[f64]) -> Result<f64> {
        match &self.kind {
            FamilyKind::PowerUnimodal { .. }
            | FamilyKind::PowerLaw { .. }
            | FamilyKind::FlatExp { .. }
            | FamilyKind::LorenzFlat { .. } => Ok(0.0),
            FamilyKind::MultiplicativeClassE { core } => Ok(core.critical_point()),
            FamilyKind::LorenzAffine => Ok(params[1]),
            FamilyKind::PiecewiseLinear { nu, .. } if *nu == 1 => {
                Ok(self.pl_spec(params)?.turning[1])
            }
            _ => Err(Error::Unsupported(format!(
                "{} has no single turning point",
                self.name()
            ))),
        }
    }

    /// Interval that orbits are expected to stay in (with a small slack);
    /// `None` when no such check applies.
    pub fn invariant_bounds(&self, params: &[f64]) -> Option<(f64, f64)> {
        let slack = 1e-9;
        match &self.kind {
            FamilyKind::PowerUnimodal { .. } => {
                let r = 2.0 + params[0].abs();
                Some((-r, r))
            }
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } if ell_minus.min(*ell_plus) >= 2.0 => {
                let r = 2.0 + params[0].abs();
                Some((-r, r))
            }
            FamilyKind::MultiplicativeClassE { core } if core.has_invariant_part() => {
                let (lo, hi) = core.unimodal_part();
                Some((lo - slack, hi + slack))
            }
            FamilyKind::PiecewiseLinear { .. }
            | FamilyKind::LorenzAffine => Some((-1.0 - slack, 1.0 + slack)),
            _ => None,
        }
    }

    fn in_domain(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Domain(x));
        }
        match self.kind {
            FamilyKind::PiecewiseLinear { .. } | FamilyKind::LorenzAffine => {
                if x.abs() > 1.0 + 1e-9 {
                    return Err(Error::Domain(x));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Evaluates the map at `x`; one-sided limits are taken at discontinuities.
    pub fn eval(&self, params: &[f64], x: SidedPoint) -> Result<f64> {
        self.check_params(params)?;
        self.eval_unchecked(params, x)
    }

    pub(crate) fn eval_unchecked(&self, params: &[f64], x: SidedPoint) -> Result<f64> {
        self.in_domain(x.value)?;
        let v = x.value;
        Ok(match &self.kind {
            FamilyKind::PowerUnimodal { d } => v.powi(*d as i32) + params[0],
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } => {
                let left = v < 0.0 || (v == 0.0 && x.side == Side::Minus);
                let ell = if left { *ell_minus } else { *ell_plus };
                pow_real(v.abs(), ell) + params[0]
            }
            FamilyKind::FlatExp { ell, b } => flat_term(*b, *ell, v) + params[0],
            FamilyKind::MultiplicativeClassE { core } => params[0] * core.eval(v),
            FamilyKind::PiecewiseLinear { .. } => self.pl_spec(params)?.eval(v),
            FamilyKind::LorenzAffine => {
                let (t, c) = (params[0], params[1]);
                match lorenz_side(v, c, x.side)? {
                    Side::Minus => t * v + (t - 1.0),
                    _ => t * v - (t - 1.0),
                }
            }
            FamilyKind::LorenzFlat { ell, b } => match lorenz_side(v, 0.0, x.side)? {
                Side::Minus => params[0] - flat_term(*b, *ell, v),
                _ => params[1] + flat_term(*b, *ell, v),
            },
            FamilyKind::Arnold { d } => {
                let raw = *d as f64 * v + params[0] + params[1] * (2.0 * PI * v).sin();
                raw.rem_euclid(1.0)
            }
        })
    }

    /// Analytic derivative in x.
    pub fn d_dx(&self, params: &[f64], x: SidedPoint) -> Result<f64> {
        self.check_params(params)?;
        self.d_dx_unchecked(params, x)
    }

    pub(crate) fn d_dx_unchecked(&self, params: &[f64], x: SidedPoint) -> Result<f64> {
        self.in_domain(x.value)?;
        let v = x.value;
        Ok(match &self.kind {
            FamilyKind::PowerUnimodal { d } => *d as f64 * v.powi(*d as i32 - 1),
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } => {
                if v == 0.0 {
                    let ell = match x.side {
                        Side::Minus => *ell_minus,
                        Side::Plus => *ell_plus,
                        Side::TwoSided => ell_minus.min(*ell_plus),
                    };
                    if ell < 2.0 {
                        return Err(Error::NonDifferentiable(v));
                    }
                    0.0
                } else if v > 0.0 {
                    ell_plus * pow_real(v, ell_plus - 1.0)
                } else {
                    -ell_minus * pow_real(-v, ell_minus - 1.0)
                }
            }
            FamilyKind::FlatExp { ell, b } => flat_term_deriv(*b, *ell, v),
            FamilyKind::MultiplicativeClassE { core } => params[0] * core.deriv(v),
            FamilyKind::PiecewiseLinear { .. } => {
                let pl = self.pl_spec(params)?;
                let i = pl.branch(v, x.side).ok_or(Error::NonDifferentiable(v))?;
                pl.slopes[i - 1]
            }
            FamilyKind::LorenzAffine => {
                lorenz_side(v, params[1], x.side)?;
                params[0]
            }
            FamilyKind::LorenzFlat { ell, b } => {
                lorenz_side(v, 0.0, x.side)?;
                flat_term_deriv(*b, *ell, v).abs()
            }
            FamilyKind::Arnold { d } => *d as f64 + 2.0 * PI * params[1] * (2.0 * PI * v).cos(),
        })
    }

    /// Analytic derivative with respect to each natural parameter.
    pub fn d_dparam(&self, params: &[f64], x: SidedPoint) -> Result<Vec<f64>> {
        self.check_params(params)?;
        self.in_domain(x.value)?;
        let v = x.value;
        Ok(match &self.kind {
            FamilyKind::PowerUnimodal { .. }
            | FamilyKind::PowerLaw { .. }
            | FamilyKind::FlatExp { .. } => vec![1.0],
            FamilyKind::MultiplicativeClassE { core } => vec![core.eval(v)],
            FamilyKind::PiecewiseLinear { .. } => {
                let pl = self.pl_spec(params)?;
                let side = if x.side == Side::TwoSided {
                    Side::Minus
                } else {
                    x.side
                };
                let i = pl.branch(v, side).ok_or(Error::NonDifferentiable(v))?;
                pl.value_gradient(v, i)
            }
            FamilyKind::LorenzAffine => match lorenz_side(v, params[1], x.side)? {
                Side::Minus => vec![v + 1.0, 0.0],
                _ => vec![v - 1.0, 0.0],
            },
            FamilyKind::LorenzFlat { .. } => match lorenz_side(v, 0.0, x.side)? {
                Side::Minus => vec![1.0, 0.0],
                _ => vec![0.0, 1.0],
            },
            FamilyKind::Arnold { .. } => vec![1.0, (2.0 * PI * v).sin()],
        })
    }

    /// Turning points and discontinuity sides, ordered by position.
    pub fn critical_data(&self, params: &[f64]) -> Result<Vec<CriticalPoint>> {
        self.check_params(params)?;
        let cp = |point: SidedPoint, value: f64, order: [f64; 2], flat: bool| CriticalPoint {
            point,
            value,
            order,
            flat,
        };
        Ok(match &self.kind {
            FamilyKind::PowerUnimodal { d } => {
                vec![cp(SidedPoint::new(0.0), params[0], [*d as f64; 2], false)]
            }
            FamilyKind::PowerLaw {
                ell_minus,
                ell_plus,
            } => vec![cp(
                SidedPoint::new(0.0),
                params[0],
                [*ell_minus, *ell_plus],
                false,
            )],
            FamilyKind::FlatExp { .. } => {
                vec![cp(SidedPoint::new(0.0), params[0], [f64::INFINITY; 2], true)]
            }
            FamilyKind::MultiplicativeClassE { core } => {
                let c = core.critical_point();
                vec![cp(SidedPoint::new(c), params[0] * core.eval(c), [2.0; 2], false)]
            }
            FamilyKind::PiecewiseLinear { nu, .. } => {
                let pl = self.pl_spec(params)?;
                (1..=*nu)
                    .map(|i| cp(SidedPoint::new(pl.turning[i]), pl.v[i - 1], [1.0; 2], false))
                    .collect()
            }
            FamilyKind::LorenzAffine => {
                let (t, c) = (params[0], params[1]);
                vec![
                    cp(SidedPoint::minus(c), t * c + (t - 1.0), [1.0; 2], false),
                    cp(SidedPoint::plus(c), t * c - (t - 1.0), [1.0; 2], false),
                ]
            }
            FamilyKind::LorenzFlat { .. } => vec![
                cp(SidedPoint::minus(0.0), params[0], [f64::INFINITY; 2], true),
                cp(SidedPoint::plus(0.0), params[1], [f64::INFINITY; 2], true),
            ],
            FamilyKind::Arnold { .. } => arnold_critical_points(self, params)?
                .into_iter()
                .map(|e| {
                    let value = self.eval_unchecked(params, SidedPoint::new(e)).unwrap();
                    cp(SidedPoint::new(e), value, [2.0; 2], false)
                })
                .collect(),
        })
    }
}

/// Resolves which branch of a Lorenz map applies at `v`.
fn lorenz_side(v: f64, c: f64, side: Side) -> Result<Side> {
    if v < c {
        Ok(Side::Minus)
    } else if v > c {
        Ok(Side::Plus)
    } else if side == Side::TwoSided {
        Err(Error::SideRequired(v))
    } else {
        Ok(side)
    }
}

/// Both critical points of the Arnold map in [0,1), from cos 2 pi t = -d/(2 pi b).
pub(crate) fn arnold_critical_points(family: &FamilySpec, params: &[f64]) -> Result<[f64; 2]> {
    let FamilyKind::Arnold { d } = family.kind else {
        return Err(Error::Unsupported("not an Arnold family".into()));
    };
    let ratio = -(d as f64) / (2.0 * PI * params[1]);
    if ratio.abs() >= 1.0 {
        return Err(Error::InvalidArgument("no real critical points".into()));
    }
    let t1 = ratio.acos() / (2.0 * PI);
    let t2 = 1.0 - t1;
    Ok(if t1 < t2 { [t1, t2] } else { [t2, t1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_beta(ell: f64, b: f64) -> f64 {
        crate::roots::bisect(|x| 2.0 * x * (x.powf(-ell)).exp() - b, 1e-3, ell.powf(1.0 / ell)).unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let q = FamilySpec::quadratic();
        assert_eq!(q.eval(&[-1.0], 0.0.into()).unwrap(), -1.0);
        assert_eq!(q.d_dx(&[-1.0], (-1.0).into()).unwrap(), -2.0);
        assert_eq!(q.d_dparam(&[-1.0], 0.3.into()).unwrap(), vec![1.0]);
        let cd = q.critical_data(&[-0.4]).unwrap();
        assert_eq!(cd.len(), 1);
        assert_eq!(cd[0].value, -0.4);
        assert_eq!(cd[0].order, [2.0, 2.0]);
    }

    #[test]
    fn flat_exp_fixed_point_and_derivative() {
        let f = FamilySpec::new(FamilyKind::FlatExp { ell: 1.0, b: 6.0 }).unwrap();
        let beta = flat_beta(1.0, 6.0);
        assert!((beta - 0.6612).abs() < 1e-3);
        // f_0(beta) = 2 beta because f_{-beta}(beta) = beta
        let y = f.eval(&[0.0], beta.into()).unwrap();
        assert!((y - 2.0 * beta).abs() < 1e-12);
        for x in [beta, -beta] {
            let d = f.d_dx(&[0.0], x.into()).unwrap().abs();
            assert!((d - 2.0 / beta).abs() < 1e-10 * d);
        }
        assert_eq!(f.eval(&[-0.3], 0.0.into()).unwrap(), -0.3);
        assert_eq!(f.d_dx(&[-0.3], 0.0.into()).unwrap(), 0.0);
    }

    #[test]
    fn flat_exp_rejects_small_b() {
        assert!(FamilySpec::new(FamilyKind::FlatExp { ell: 1.0, b: 5.0 }).is_err());
        assert!(FamilySpec::new(FamilyKind::FlatExp { ell: 2.0, b: 4.7 }).is_ok());
    }

    #[test]
    fn lorenz_affine_sides() {
        let f = FamilySpec::new(FamilyKind::LorenzAffine).unwrap();
        let p = [1.5, 0.0];
        assert_eq!(f.eval(&p, SidedPoint::plus(0.0)).unwrap(), -0.5);
        assert_eq!(f.eval(&p, SidedPoint::minus(0.0)).unwrap(), 0.5);
        assert!(matches!(
            f.eval(&p, SidedPoint::new(0.0)),
            Err(Error::SideRequired(_))
        ));
        assert!(f.eval(&[2.5, 0.0], 0.1.into()).is_err());
    }

    #[test]
    fn power_law_cusp_is_not_differentiable() {
        let f = FamilySpec::new(FamilyKind::PowerLaw {
            ell_minus: 1.5,
            ell_plus: 3.0,
        })
        .unwrap();
        assert!(matches!(
            f.d_dx(&[-1.0], 0.0.into()),
            Err(Error::NonDifferentiable(_))
        ));
        let d = f.d_dx(&[-1.0], (-0.5).into()).unwrap();
        assert!((d + 1.5 * 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sin_multiplicative_examples() {
        let f = FamilySpec::new(FamilyKind::MultiplicativeClassE { core: CoreMap::Sin }).unwrap();
        let g = f.d_dparam(&[2.0], 1.0.into()).unwrap();
        assert!((g[0] - 1f64.sin()).abs() < 1e-15);
        let cd = f.critical_data(&[2.0]).unwrap();
        assert!((cd[0].point.value - PI / 2.0).abs() < 1e-15);
        assert!((cd[0].value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn arnold_critical_points_solve_the_cosine_equation() {
        let f = FamilySpec::new(FamilyKind::Arnold { d: 1 }).unwrap();
        let cd = f.critical_data(&[0.3, 1.0]).unwrap();
        assert_eq!(cd.len(), 2);
        for c in &cd {
            let t = c.point.value;
            assert!((1.0 + 2.0 * PI * (2.0 * PI * t).cos()).abs() < 1e-12);
            assert!(f.d_dx(&[0.3, 1.0], t.into()).unwrap().abs() < 1e-12);
        }
        assert!((cd[0].point.value + cd[1].point.value - 1.0).abs() < 1e-15);
        let want = (-1.0 / (2.0 * PI)).acos() / (2.0 * PI);
        assert!((cd[0].point.value - want).abs() < 1e-15);
        assert!(f.check_params(&[0.0, 0.1]).is_err());
    }

    #[test]
    fn additive_shift_is_exact() {
        let fams = [
            FamilySpec::quadratic(),
            FamilySpec::new(FamilyKind::PowerLaw {
                ell_minus: 3.0,
                ell_plus: 2.5,
            })
            .unwrap(),
            FamilySpec::new(FamilyKind::FlatExp { ell: 1.0, b: 6.0 }).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in &fams {
            for _ in 0..1000 {
                let c: f64 = rng.gen_range(-2.0..0.25);
                let x: f64 = rng.gen_range(-1.5..1.5);
                let delta: f64 = rng.gen_range(-0.1..0.1);
                let base = f.eval(&[0.0], x.into()).unwrap();
                let shifted = f.eval(&[c + delta], x.into()).unwrap();
                assert_eq!(shifted, base + (c + delta));
            }
        }
    }

    /// Every kind, random (params, x): analytic derivatives match central
    /// differences.
    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cases: Vec<(FamilySpec, Box<dyn Fn(&mut ChaCha8Rng) -> (Vec<f64>, f64)>)> = vec![
            (
                FamilySpec::quadratic(),
                Box::new(|r| (vec![r.gen_range(-2.0..0.25)], r.gen_range(-2.0..2.0))),
            ),
            (
                FamilySpec::new(FamilyKind::PowerUnimodal { d: 4 }).unwrap(),
                Box::new(|r| (vec![r.gen_range(-2.0..0.25)], r.gen_range(-1.5..1.5))),
            ),
            (
                FamilySpec::new(FamilyKind::PowerLaw {
                    ell_minus: 2.5,
                    ell_plus: 3.0,
                })
                .unwrap(),
                Box::new(|r| (vec![r.gen_range(-2.0..0.0)], r.gen_range(-1.5..1.5))),
            ),
            (
                FamilySpec::new(FamilyKind::FlatExp { ell: 1.0, b: 6.0 }).unwrap(),
                Box::new(|r| (vec![r.gen_range(-1.0..0.0)], r.gen_range(-2.0..2.0))),
            ),
            (
                FamilySpec::new(FamilyKind::MultiplicativeClassE { core: CoreMap::Sin }).unwrap(),
                Box::new(|r| (vec![r.gen_range(0.5..3.0)], r.gen_range(0.0..3.0))),
            ),
            (
                FamilySpec::new(FamilyKind::MultiplicativeClassE {
                    core: CoreMap::GaussPower { m: 3 },
                })
                .unwrap(),
                Box::new(|r| (vec![r.gen_range(0.5..2.0)], r.gen_range(0.0..2.5))),
            ),
            (
                FamilySpec::new(FamilyKind::PiecewiseLinear {
                    epsilon: 1,
                    nu: 2,
                    kappa: vec![1.0, 2.0, 0.5],
                })
                .unwrap(),
                Box::new(|r| (vec![r.gen_range(0.2..0.9), r.gen_range(-0.9..-0.2)], r.gen_range(-1.0..1.0))),
            ),
            (
                FamilySpec::new(FamilyKind::LorenzAffine).unwrap(),
                Box::new(|r| (vec![r.gen_range(1.1..1.9), r.gen_range(-0.05..0.05)], r.gen_range(-1.0..1.0))),
            ),
            (
                FamilySpec::new(FamilyKind::LorenzFlat { ell: 1.0, b: 6.0 }).unwrap(),
                Box::new(|r| (vec![r.gen_range(0.0..0.6), r.gen_range(-0.6..0.0)], r.gen_range(-2.0..2.0))),
            ),
            (
                FamilySpec::new(FamilyKind::Arnold { d: 1 }).unwrap(),
                Box::new(|r| (vec![r.gen_range(0.0..1.0), r.gen_range(0.3..1.0)], r.gen_range(0.0..1.0))),
            ),
        ];
        for (f, sample) in &cases {
            let mut checked = 0;
            for _ in 0..10_000 {
                let (p, x) = sample(&mut rng);
                let h = 1e-6 * (1.0 + x.abs());
                // skip samples straddling a kink or discontinuity
                let kinks: Vec<f64> = match f.kind() {
                    FamilyKind::PiecewiseLinear { .. } => f.pl_spec(&p).unwrap().turning.clone(),
                    FamilyKind::LorenzAffine => vec![p[1]],
                    _ => vec![0.0],
                };
                if kinks.iter().any(|k| (x - k).abs() < 4.0 * h) {
                    continue;
                }
                let ev = |pp: &[f64], xx: f64| f.eval(pp, xx.into()).unwrap();
                let unwrap = |a: f64, b: f64| {
                    // Arnold values are taken mod 1
                    if f.is_circle() {
                        let d = a - b;
                        d - d.round()
                    } else {
                        a - b
                    }
                };
                let fd = unwrap(ev(&p, x + h), ev(&p, x - h)) / (2.0 * h);
                let an = f.d_dx(&p, x.into()).unwrap();
                assert!(
                    (an - fd).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{}: d/dx at {x}, params {p:?}: {an} vs {fd}",
                    f.name()
                );
                let grad = f.d_dparam(&p, x.into()).unwrap();
                for k in 0..p.len() {
                    let hp = 1e-6 * (1.0 + p[k].abs());
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp[k] += hp;
                    pm[k] -= hp;
                    let fd = unwrap(ev(&pp, x), ev(&pm, x)) / (2.0 * hp);
                    assert!(
                        (grad[k] - fd).abs() <= 1e-6 * (1.0 + grad[k].abs()),
                        "{}: d/dp{k} at {x}, params {p:?}: {} vs {fd}",
                        f.name(),
                        grad[k]
                    );
                }
                checked += 1;
            }
            assert!(checked > 9000, "{}: only {checked} samples", f.name());
        }
    }
}
