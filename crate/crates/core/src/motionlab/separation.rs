//! Explicit covering-domain geometry for the separation property.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilySpec};
use crate::roots::bisect;

/// `beta` with `b = 2 beta e^{1/beta^l}`, so that `f_{-beta}(0) = -beta` and
/// `f_{-beta}(beta) = beta`.
pub fn flat_beta(ell: f64, b: f64) -> Result<f64> {
    if !(ell >= 1.0) || !(b > 2.0 * (std::f64::consts::E * ell).powf(1.0 / ell)) {
        return Err(Error::InvalidArgument(format!("need l >= 1 and b > 2 (e l)^(1/l), got l = {ell}, b = {b}")));
    }
    let hi = ell.powf(1.0 / ell);
    bisect(|x| (2.0 * x).ln() + x.powf(-ell) - b.ln(), 1e-12 * hi, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatGeometry {
    pub ell: f64,
    pub b: f64,
    pub beta: f64,
    /// Residual of `ln(2 beta) + beta^{-l} - ln b`.
    pub beta_residual: f64,
    /// `Df_{-beta}(beta) = 2 l / beta^l`.
    pub expansion: f64,
    pub x0: f64,
    pub x1: f64,
    /// `f_0(x0) = x1 + beta`.
    pub r: f64,
    /// Diameter `2 x0` of the covering domain.
    pub diam_u: f64,
}

pub fn flat_geometry(ell: f64, b: f64) -> Result<FlatGeometry> {
    let beta = flat_beta(ell, b)?;
    let f = |x: f64| b * (-x.powf(-ell)).exp() - beta;
    let mut delta = beta / 2.0;
    for _ in 0..60 {
        let x0 = beta + delta;
        let x1 = f(x0);
        if x1 - beta > 2.0 * delta {
            let r = x1 + beta;
            let g = FlatGeometry {
                ell,
                b,
                beta,
                beta_residual: ((2.0 * beta).ln() + beta.powf(-ell) - b.ln()).abs(),
                expansion: 2.0 * ell / beta.powf(ell),
                x0,
                x1,
                r,
                diam_u: 2.0 * x0,
            };
            if !(g.diam_u < r) {
                return Err(Error::GeometryFailed(format!("2 x0 = {} >= R = {r}", g.diam_u)));
            }
            if !(r < b) {
                return Err(Error::GeometryFailed(format!("R = {r} >= b = {b}")));
            }
            return Ok(g);
        }
        delta /= 2.0;
    }
    Err(Error::GeometryFailed("no x0 with x1 - beta > 2 (x0 - beta)".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub family: String,
    pub holds: bool,
    pub description: String,
    pub geometry: Option<FlatGeometry>,
}

/// Checks the covering-domain inclusions for power, flat and flat Lorenz
/// families. A violated inequality is an error.
pub fn separation_check(family: &FamilySpec, params: &[f64]) -> Result<SeparationReport> {
    family.check_params(params)?;
    let name = family.name().to_string();
    match *family.kind() {
        FamilyKind::PowerUnimodal { d } => Ok(SeparationReport {
            family: name,
            holds: true,
            description: format!("z^{d} + c is a global covering of C minus the critical value"),
            geometry: None,
        }),
        FamilyKind::FlatExp { ell, b } => {
            let g = flat_geometry(ell, b)?;
            if params[0] < -g.beta {
                return Err(Error::GeometryFailed(format!("c = {} < -beta = {}", params[0], -g.beta)));
            }
            Ok(SeparationReport {
                family: name,
                holds: true,
                description: format!("diam U = {} < R = {} < b = {b}", g.diam_u, g.r),
                geometry: Some(g),
            })
        }
        FamilyKind::LorenzFlat { ell, b } => {
            let g = flat_geometry(ell, b)?;
            let (c1, c2) = (params[0], params[1]);
            if !(c1 > 0.0 && c1 <= g.beta) {
                return Err(Error::GeometryFailed(format!("c1 = {c1} not in (0, beta = {}]", g.beta)));
            }
            if !(c2 < 0.0 && c2 >= -g.beta) {
                return Err(Error::GeometryFailed(format!("c2 = {c2} not in [-beta = {}, 0)", -g.beta)));
            }
            Ok(SeparationReport {
                family: name,
                holds: true,
                description: format!("both branches: diam U = {} < R = {}", g.diam_u, g.r),
                geometry: Some(g),
            })
        }
        _ => Err(Error::Unsupported(format!("separation check for {name}"))),
    }
}
