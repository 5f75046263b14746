use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use kneadlab_core::families::{CoreMap, FamilyKind, FamilySpec};
use kneadlab_core::motionlab::flat_beta;

pub const SHORTCUTS: &[&str] = &[
    "quad", "quartic", "sine", "logistic", "tent", "flat", "lorenz", "lorenz-flat", "arnold",
    "powerlaw",
];

/// Family from a shortcut name or from a JSON family kind, given inline or as
/// a file path, e.g. `{"PowerUnimodal":{"d":4}}`.
pub fn resolve(shortcut: Option<&str>, json: Option<&str>, ell: Option<f64>) -> Result<FamilySpec> {
    match (shortcut, json) {
        (Some(_), Some(_)) => bail!("give either --family or --family-json, not both"),
        (None, None) => bail!("a family is required (--family or --family-json)"),
        (None, Some(j)) => {
            let text = if j.trim_start().starts_with('{') {
                j.to_string()
            } else {
                std::fs::read_to_string(j).with_context(|| format!("reading {j}"))?
            };
            let kind: FamilyKind = serde_json::from_str(&text).context("parsing family JSON")?;
            Ok(FamilySpec::new(kind)?)
        }
        (Some(name), None) => {
            let kind = match name {
                "quad" => FamilyKind::PowerUnimodal { d: 2 },
                "quartic" => FamilyKind::PowerUnimodal { d: 4 },
                "sine" => FamilyKind::MultiplicativeClassE { core: CoreMap::Sin },
                "logistic" => FamilyKind::MultiplicativeClassE { core: CoreMap::Logistic },
                "tent" => return Ok(FamilySpec::tent()),
                "flat" => FamilyKind::FlatExp { ell: ell.unwrap_or(1.0), b: 6.0 },
                "lorenz" => FamilyKind::LorenzAffine,
                "lorenz-flat" => FamilyKind::LorenzFlat { ell: ell.unwrap_or(1.0), b: 6.0 },
                "arnold" => FamilyKind::Arnold { d: 1 },
                "powerlaw" => {
                    let l = ell.unwrap_or(60.0);
                    FamilyKind::PowerLaw { ell_minus: l, ell_plus: l }
                }
                other => bail!("unknown family '{other}' (known: {})", SHORTCUTS.join(", ")),
            };
            Ok(FamilySpec::new(kind)?)
        }
    }
}

/// Default parameter bracket for one-parameter families.
pub fn default_bracket(family: &FamilySpec) -> Option<(f64, f64)> {
    match family.kind() {
        FamilyKind::PowerUnimodal { d: 2 } => Some((-2.0, 0.25)),
        FamilyKind::PowerUnimodal { .. } => None,
        FamilyKind::PowerLaw { ell_minus, ell_plus } if ell_minus == ell_plus => {
            power_law_left_end(*ell_minus).map(|c| (c, 0.0))
        }
        FamilyKind::FlatExp { ell, b } => flat_beta(*ell, *b).ok().map(|beta| (-beta, -1e-9)),
        FamilyKind::MultiplicativeClassE { core: CoreMap::Sin } => Some((1e-6, PI)),
        FamilyKind::MultiplicativeClassE { core: CoreMap::Logistic } => Some((1e-6, 1.0)),
        FamilyKind::PiecewiseLinear { nu: 1, .. } => Some((1e-6, 1.0)),
        _ => None,
    }
}

/// Smallest `c` for which `|x|^l + c` keeps its critical orbit bounded.
fn power_law_left_end(ell: f64) -> Option<f64> {
    use kneadlab_core::roots::bisect;
    bisect(
        |c: f64| {
            let beta = bisect(|b: f64| b.powf(ell) + c - b, 1.0, 2.0).unwrap_or(f64::NAN);
            c.abs().powf(ell) + c - beta
        },
        -2.0,
        -0.5,
    )
    .ok()
}
