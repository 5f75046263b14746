use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::linalg::C64;

/// Core map `f` of a multiplicative family `x -> a f(x)`. Every core has
/// `f(0) = 0` and a positive local maximum `f(c) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoreMap {
    Sin,
    Logistic,
    ExpLogistic,
    SinSquared,
    /// `(m/2)^{-m/2} e^{m/2} x^m e^{-x^2}`
    GaussPower { m: u32 },
}

impl CoreMap {
    pub fn name(&self) -> String {
        match self {
            CoreMap::Sin => "sin".into(),
            CoreMap::Logistic => "logistic".into(),
            CoreMap::ExpLogistic => "exp-logistic".into(),
            CoreMap::SinSquared => "sin2".into(),
            CoreMap::GaussPower { m } => format!("gauss-power-{m}"),
        }
    }

    pub fn parse(s: &str) -> Option<CoreMap> {
        match s {
            "sin" => Some(CoreMap::Sin),
            "logistic" => Some(CoreMap::Logistic),
            "exp-logistic" => Some(CoreMap::ExpLogistic),
            "sin2" => Some(CoreMap::SinSquared),
            _ => s
                .strip_prefix("gauss-power-")
                .and_then(|m| m.parse().ok())
                .filter(|&m| m >= 1)
                .map(|m| CoreMap::GaussPower { m }),
        }
    }

    fn gauss_scale(m: u32) -> f64 {
        let h = m as f64 / 2.0;
        h.powf(-h) * h.exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            CoreMap::Sin => x.sin(),
            CoreMap::Logistic => 4.0 * x * (1.0 - x),
            CoreMap::ExpLogistic => 4.0 * x.exp() * (1.0 - x.exp()),
            CoreMap::SinSquared => x.sin().powi(2),
            CoreMap::GaussPower { m } => {
                Self::gauss_scale(m) * x.powi(m as i32) * (-x * x).exp()
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            CoreMap::Sin => x.cos(),
            CoreMap::Logistic => 4.0 - 8.0 * x,
            CoreMap::ExpLogistic => 4.0 * x.exp() * (1.0 - 2.0 * x.exp()),
            CoreMap::SinSquared => (2.0 * x).sin(),
            CoreMap::GaussPower { m } => {
                let mf = m as f64;
                Self::gauss_scale(m) * x.powi(m as i32 - 1) * (-x * x).exp() * (mf - 2.0 * x * x)
            }
        }
    }

    pub fn eval_c(&self, z: C64) -> C64 {
        match *self {
            CoreMap::Sin => z.sin(),
            CoreMap::Logistic => z * (1.0 - z) * 4.0,
            CoreMap::ExpLogistic => z.exp() * (1.0 - z.exp()) * 4.0,
            CoreMap::SinSquared => z.sin() * z.sin(),
            CoreMap::GaussPower { m } => z.powi(m as i32) * (-z * z).exp() * Self::gauss_scale(m),
        }
    }

    pub fn deriv_c(&self, z: C64) -> C64 {
        match *self {
            CoreMap::Sin => z.cos(),
            CoreMap::Logistic => 4.0 - z * 8.0,
            CoreMap::ExpLogistic => z.exp() * (1.0 - z.exp() * 2.0) * 4.0,
            CoreMap::SinSquared => (z * 2.0).sin(),
            CoreMap::GaussPower { m } => {
                z.powi(m as i32 - 1) * (-z * z).exp() * (m as f64 - z * z * 2.0)
                    * Self::gauss_scale(m)
            }
        }
    }

    /// The positive local maximum `c` with `f(c) = 1`.
    pub fn critical_point(&self) -> f64 {
        match *self {
            CoreMap::Sin | CoreMap::SinSquared => FRAC_PI_2,
            CoreMap::Logistic => 0.5,
            // the maximum of 4e^x(1-e^x) sits at e^x = 1/2, left of 0
            CoreMap::ExpLogistic => -LN_2,
            CoreMap::GaussPower { m } => (m as f64 / 2.0).sqrt(),
        }
    }

    /// Unimodal part `[lo, b)`: `b = sup{x > c : f(x) > 0}`.
    pub fn unimodal_part(&self) -> (f64, f64) {
        match *self {
            CoreMap::Sin | CoreMap::SinSquared => (0.0, PI),
            CoreMap::Logistic => (0.0, 1.0),
            CoreMap::ExpLogistic => (f64::NEG_INFINITY, 0.0),
            CoreMap::GaussPower { .. } => (0.0, f64::INFINITY),
        }
    }

    /// True for odd cores (the class where `f(-x) = -f(x)`).
    pub fn is_odd(&self) -> bool {
        match *self {
            CoreMap::Sin => true,
            CoreMap::GaussPower { m } => m % 2 == 1,
            _ => false,
        }
    }

    /// Whether the multiplicative family keeps the unimodal part invariant for
    /// parameters in `(0, sup J]`.
    pub fn has_invariant_part(&self) -> bool {
        !matches!(self, CoreMap::ExpLogistic)
    }
}
