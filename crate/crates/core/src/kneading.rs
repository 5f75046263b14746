//! Itineraries, kneading sequences and the Milnor–Thurston order.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{FamilySpec, SidedPoint};

pub const DEFAULT_DELTA_HIT: f64 = 1e-9;
pub const MAX_ORBIT: usize = 4096;

/// A word over {-1, 0, +1}. Iteration stops at the first 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KneadingSequence {
    pub symbols: Vec<i8>,
    /// Set when the word ends in a hit of the turning point that closes a cycle.
    pub period: Option<usize>,
    /// True when the word was cut at the requested length without a hit.
    pub truncated: bool,
}

impl KneadingSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Parses a compact word such as `-+0`. Both `-` and `\u{2212}` are accepted.
    pub fn parse(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '-' | '\u{2212}' => Ok(-1),
                '+' => Ok(1),
                '0' => Ok(0),
                other => Err(Error::InvalidArgument(format!("bad kneading symbol {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        if let Some(pos) = symbols.iter().position(|&s| s == 0) {
            if pos + 1 != symbols.len() {
                return Err(Error::InvalidArgument(
                    "0 may only appear as the last symbol".into(),
                ));
            }
        }
        let period = symbols.last().filter(|&&s| s == 0).map(|_| symbols.len());
        Ok(KneadingSequence {
            truncated: period.is_none(),
            symbols,
            period,
        })
    }
}

impl fmt::Display for KneadingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            let c = match s {
                -1 => '-',
                1 => '+',
                _ => '0',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Kneading data of a family member: one word for unimodal kinds, the two
/// one-sided words of `c-` and `c+` for Lorenz kinds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kneading {
    Single(KneadingSequence),
    Pair {
        minus: KneadingSequence,
        plus: KneadingSequence,
    },
}

impl Kneading {
    pub fn single(&self) -> Option<&KneadingSequence> {
        match self {
            Kneading::Single(k) => Some(k),
            Kneading::Pair { .. } => None,
        }
    }
}

impl fmt::Display for Kneading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kneading::Single(k) => write!(f, "{k}"),
            Kneading::Pair { minus, plus } => write!(f, "{minus}|{plus}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    Less,
    Equal,
    Greater,
    UndecidedPrefix,
}

impl Order {
    pub fn reversed(self) -> Order {
        match self {
            Order::Less => Order::Greater,
            Order::Greater => Order::Less,
            o => o,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Order::Less => "less",
            Order::Equal => "equal",
            Order::Greater => "greater",
            Order::UndecidedPrefix => "undecided",
        }
    }
}

/// Symbols of the orbit of `x0` relative to the family's turning point.
pub fn itinerary(
    family: &FamilySpec,
    params: &[f64],
    x0: SidedPoint,
    n: usize,
    delta_hit: f64,
) -> Result<KneadingSequence> {
    if n > MAX_ORBIT {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds {MAX_ORBIT}")));
    }
    if !(delta_hit >= 0.0) {
        return Err(Error::InvalidArgument("delta_hit must be >= 0".into()));
    }
    family.check_params(params)?;
    let turn = family.turning_point(params)?;
    let bounds = family.invariant_bounds(params);
    let starts_at_turn = (x0.value - turn).abs() <= delta_hit;
    let mut x = x0;
    let mut symbols = Vec::with_capacity(n.min(64));
    for k in 1..=n {
        let y = family.eval_unchecked(params, x)?;
        if !y.is_finite() || bounds.is_some_and(|(lo, hi)| y < lo || y > hi) {
            return Err(Error::OrbitEscaped { step: k, x: y });
        }
        let d = y - turn;
        if d.abs() <= delta_hit {
            symbols.push(0);
            return Ok(KneadingSequence {
                symbols,
                period: starts_at_turn.then_some(k),
                truncated: false,
            });
        }
        symbols.push(if d > 0.0 { 1 } else { -1 });
        x = SidedPoint::new(y);
    }
    Ok(KneadingSequence {
        symbols,
        period: None,
        truncated: true,
    })
}

/// Kneading sequence: itinerary of the critical value(s) of the family.
pub fn kneading(family: &FamilySpec, params: &[f64], n: usize, delta_hit: f64) -> Result<Kneading> {
    let crit = family.critical_data(params)?;
    if family.is_lorenz() {
        let minus = itinerary(family, params, crit[0].point, n, delta_hit)?;
        let plus = itinerary(family, params, crit[1].point, n, delta_hit)?;
        return Ok(Kneading::Pair { minus, plus });
    }
    if crit.len() != 1 {
        return Err(Error::Unsupported(format!(
            "kneading of {} with {} critical points",
            family.name(),
            crit.len()
        )));
    }
    itinerary(family, params, crit[0].point, n, delta_hit).map(Kneading::Single)
}

/// Signed-lexicographic comparison: at the first index where the words
/// differ, compare the products of all symbols up to that index.
pub fn mt_compare(a: &[i8], b: &[i8]) -> Order {
    let mut prod: i8 = 1;
    for (&x, &y) in a.iter().zip(b) {
        if x != y {
            let (px, py) = (prod * x, prod * y);
            return if px < py { Order::Less } else { Order::Greater };
        }
        prod *= x;
        if prod == 0 {
            // both words hit the turning point here and end
            return Order::Equal;
        }
    }
    if a.len() == b.len() {
        Order::Equal
    } else {
        Order::UndecidedPrefix
    }
}

pub fn mt_compare_seq(a: &KneadingSequence, b: &KneadingSequence) -> Order {
    mt_compare(&a.symbols, &b.symbols)
}

/// Topological entropy `log s` of a map with constant slope `s >= 1`.
pub fn constant_slope_entropy(s: f64) -> f64 {
    assert!(s >= 1.0, "slope {s} must be >= 1");
    s.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: f64,
    pub word: KneadingSequence,
    /// Order of the previous row's word relative to this one. `Greater`
    /// marks a decrease along the scan.
    pub prev_order: Option<Order>,
}

/// Kneading sequences along an evenly spaced grid of a one-parameter family.
/// The grid is evaluated in parallel and merged in order.
pub fn kneading_scan(
    family: &FamilySpec,
    from: f64,
    to: f64,
    steps: usize,
    prefix: usize,
    delta_hit: f64,
) -> Result<Vec<ScanRow>> {
    if family.param_dim() != 1 {
        return Err(Error::Unsupported("scans need a one-parameter family".into()));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("a scan needs at least 2 steps".into()));
    }
    let words: Vec<(f64, KneadingSequence)> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let c = if i + 1 == steps {
                to
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            };
            let k = kneading(family, &[c], prefix, delta_hit)?;
            Ok((c, k.single().cloned().unwrap()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(steps);
    for (i, (param, word)) in words.iter().enumerate() {
        let prev_order = (i > 0).then(|| mt_compare_seq(&words[i - 1].1, word));
        rows.push(ScanRow {
            param: *param,
            word: word.clone(),
            prev_order,
        });
    }
    Ok(rows)
}
