//! Transfer operators of a marked orbit: `A_J` indexed by orbit positions and
//! `A` indexed by the points of `g(P)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Side, SidedPoint};
use crate::linalg::{self, CMatrix, C64};
use crate::transversality::{
    d_rho_from, point_distance, LinearizedTriple, MarkedOrbit, Relation,
};

pub const EIGEN_ONE_TOL: f64 = 1e-6;

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Index set `J`: `(0, j)` when `j` is some `mu(j')`, then `(i, j)` for
/// `1 <= i < q_j`; ordered by `j`, then `i`.
pub fn index_set(orbit: &MarkedOrbit) -> Vec<(usize, usize)> {
    let targets: Vec<usize> = orbit
        .orbits
        .iter()
        .filter_map(|o| match o.relation {
            Relation::FirstKind { mu } => Some(mu),
            Relation::SecondKind { .. } => None,
        })
        .collect();
    let mut out = Vec::new();
    for (j, o) in orbit.orbits.iter().enumerate() {
        if targets.contains(&j) {
            out.push((0, j));
        }
        out.extend((1..o.q).map(|i| (i, j)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    /// `(i, j)` labels of the rows; for `A` the label of the first orbit
    /// position at each point.
    pub labels: Vec<(usize, usize)>,
    pub points: Vec<f64>,
    pub matrix: CMatrix,
    /// Set when `A` could not be built on distinct points and `A_J` was used.
    pub collided: bool,
}

impl TransferMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// `A_J` from a linearized triple.
pub fn build_aj_from(orbit: &MarkedOrbit, t: &LinearizedTriple) -> TransferMatrix {
    let labels = index_set(orbit);
    let pos = |lab: (usize, usize)| labels.iter().position(|&x| x == lab).unwrap();
    // column of v_{i,j}, resolving the landing positions
    let resolve = |i: usize, j: usize| -> usize {
        let o = &orbit.orbits[j];
        if i < o.q {
            return pos((i, j));
        }
        match o.relation {
            Relation::FirstKind { mu } => pos((0, mu)),
            Relation::SecondKind { l } => pos((l, j)),
        }
    };
    let nu = orbit.nu();
    let n = labels.len();
    let mut a = CMatrix::zeros(n, n);
    for (row, &(i, j)) in labels.iter().enumerate() {
        if i == 0 {
            for k in 0..nu {
                a[(row, resolve(1, k))] += t.p[(j, k)];
            }
        } else {
            let d = t.dg[j][i];
            a[(row, resolve(i + 1, j))] += 1.0 / d;
            for k in 0..nu {
                a[(row, resolve(1, k))] -= t.l[j][i][k] / d;
            }
        }
    }
    let points = labels
        .iter()
        .map(|&(i, j)| orbit.orbits[j].points[i].value)
        .collect();
    TransferMatrix {
        labels,
        points,
        matrix: a,
        collided: false,
    }
}

pub fn build_aj(orbit: &MarkedOrbit) -> Result<TransferMatrix> {
    let def = orbit.deformation()?;
    Ok(build_aj_from(orbit, &LinearizedTriple::new(orbit, &def)?))
}

/// The points of `g(P)` with the data needed to lift a motion of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPointSet {
    pub points: Vec<SidedPoint>,
    pub labels: Vec<(usize, usize)>,
    /// `Some(j)` when the point is the marked point `c_{0,j}`.
    pub marked: Vec<Option<usize>>,
    /// Index of `g(x)` for unmarked points.
    pub image: Vec<Option<usize>>,
    /// Index of each critical value `c_{1,k}`.
    pub c1_index: Vec<usize>,
    /// Two labels fell on the same point.
    pub collided: bool,
}

impl OrbitPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Collects `g(P)` from the orbit points and locates images by evaluating the
/// map, independently of the orbit's index bookkeeping.
pub fn orbit_point_set(orbit: &MarkedOrbit) -> Result<OrbitPointSet> {
    let fam = &orbit.family;
    let tol = fam.closure_tol();
    let find = |pts: &[SidedPoint], x: f64| {
        pts.iter()
            .position(|p| point_distance(fam, p.value, x) < tol)
    };
    let mut points: Vec<SidedPoint> = Vec::new();
    let mut labels = Vec::new();
    let mut marked = Vec::new();
    let mut collided = false;
    for (i, j) in index_set(orbit) {
        let p = orbit.orbits[j].points[i];
        if find(&points, p.value).is_some() {
            collided = true;
            continue;
        }
        points.push(p);
        labels.push((i, j));
        marked.push((i == 0).then_some(j));
    }
    let mut image = Vec::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        if marked[idx].is_some() {
            image.push(None);
            continue;
        }
        let y = fam.eval_unchecked(&orbit.params, SidedPoint::new(p.value))?;
        let y = if fam.is_circle() { y.rem_euclid(1.0) } else { y };
        let k = find(&points, y).ok_or_else(|| {
            Error::WrongShape(format!("image {y} of {} is not in g(P)", p.value))
        })?;
        image.push(Some(k));
    }
    let c1_index = orbit
        .c1()
        .iter()
        .map(|&v| {
            find(&points, v)
                .ok_or_else(|| Error::WrongShape(format!("critical value {v} is not in g(P)")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitPointSet {
        points,
        labels,
        marked,
        image,
        c1_index,
        collided,
    })
}

/// `A` on the distinct points of `g(P)`: a marked point moves with
/// `sum_k p_{j,k} v(c_{1,k})`, any other point `x` with
/// `(v(g(x)) - sum_k L_k(x) v(c_{1,k})) / Dg(x)`. Falls back to `A_J` when
/// orbit positions collide.
pub fn build_a(orbit: &MarkedOrbit) -> Result<TransferMatrix> {
    let set = orbit_point_set(orbit)?;
    if set.collided {
        let mut aj = build_aj(orbit)?;
        aj.collided = true;
        return Ok(aj);
    }
    let def = orbit.deformation()?;
    let c1: Vec<C64> = orbit.c1().into_iter().map(cr).collect();
    let dp = def.dp_dw(&c1)?;
    let n = set.len();
    let mut a = CMatrix::zeros(n, n);
    for x in 0..n {
        if let Some(j) = set.marked[x] {
            for (k, &col) in set.c1_index.iter().enumerate() {
                a[(x, col)] += dp[(j, k)];
            }
            continue;
        }
        let p = set.points[x];
        let anchor = SidedPoint {
            value: p.value,
            side: Side::TwoSided,
        };
        let (_, gz, gw) = def.g_full(&c1, cr(p.value), anchor)?;
        if gz.norm() == 0.0 {
            return Err(Error::SingularLift(p.value));
        }
        a[(x, set.image[x].unwrap())] += 1.0 / gz;
        for (k, &col) in set.c1_index.iter().enumerate() {
            a[(x, col)] -= gw[k] / gz;
        }
    }
    Ok(TransferMatrix {
        points: set.values(),
        labels: set.labels,
        matrix: a,
        collided: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub dim: usize,
    /// Sorted by modulus, descending.
    pub eigenvalues: Vec<(f64, f64)>,
    pub spectral_radius: f64,
    /// `min_k |lambda_k - 1|`, infinite for an empty matrix.
    pub dist_to_one: f64,
    /// Largest backward error over the eigenvalues.
    pub backward_error: f64,
}

impl Spectrum {
    pub fn one_is_eigenvalue(&self) -> bool {
        self.dist_to_one <= EIGEN_ONE_TOL
    }
}

pub fn spectrum(m: &CMatrix) -> Result<Spectrum> {
    if m.rows() > 256 {
        return Err(Error::WrongShape(format!("dimension {} exceeds 256", m.rows())));
    }
    let ev = linalg::eigenvalues(m)?;
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dist = ev
        .iter()
        .map(|z| (z - 1.0).norm())
        .fold(f64::INFINITY, f64::min);
    let backward_error = ev
        .iter()
        .map(|&z| linalg::eigen_backward_error(m, z))
        .fold(0.0, f64::max);
    Ok(Spectrum {
        dim: m.rows(),
        eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(),
        spectral_radius: radius,
        dist_to_one: dist,
        backward_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `max |det(I - rho A_J) - det D(rho)|`.
    pub aj_deviation: f64,
    /// Same with `A`, when `A` was built on distinct points.
    pub a_deviation: Option<f64>,
    pub samples: usize,
}

/// Compares `det(I - rho A_J)` (and `det(I - rho A)`) with `det D(rho)`.
/// Samples within `1e-6` of an exceptional value are skipped.
pub fn char_identity_check(orbit: &MarkedOrbit, rhos: &[C64]) -> Result<IdentityCheck> {
    let def = orbit.deformation()?;
    let triple = LinearizedTriple::new(orbit, &def)?;
    let aj = build_aj_from(orbit, &triple);
    let a = build_a(orbit)?;
    let exceptional = crate::transversality::exceptional_values(orbit);
    let mut dev_j: f64 = 0.0;
    let mut dev_a: f64 = 0.0;
    let mut samples = 0;
    for &rho in rhos {
        if exceptional.iter().any(|e| (e - rho).norm() < 1e-6) {
            continue;
        }
        samples += 1;
        let d = linalg::det(&d_rho_from(orbit, &triple, rho));
        dev_j = dev_j.max((linalg::det(&aj.matrix.identity_minus(rho)) - d).norm());
        if !a.collided {
            dev_a = dev_a.max((linalg::det(&a.matrix.identity_minus(rho)) - d).norm());
        }
    }
    Ok(IdentityCheck {
        aj_deviation: dev_j,
        a_deviation: (!a.collided).then_some(dev_a),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledCheck {
    pub xi: f64,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Builds the operator of the triple composed with the contraction by
/// `1 - xi` and compares it with `(1 - xi)^{-1} A` entrywise.
pub fn scaled_triple_check(orbit: &MarkedOrbit, xi: f64) -> Result<ScaledCheck> {
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("xi = {xi} must lie in [0,1)")));
    }
    let def = orbit.deformation()?;
    let triple = LinearizedTriple::new(orbit, &def)?;
    let scaled = build_aj_from(orbit, &triple.scaled(xi));
    let base = build_a(orbit)?;
    let target = base.matrix.scale(cr(1.0 / (1.0 - xi)));
    let dev = scaled.matrix.max_abs_diff(&target);
    Ok(ScaledCheck {
        xi,
        max_deviation: dev,
        passed: dev <= 1e-12 * (1.0 + target.max_abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::FamilySpec;
    use crate::transversality::marked_orbit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quad(c: f64) -> MarkedOrbit {
        marked_orbit(&FamilySpec::quadratic(), &[c], 1e-9).unwrap()
    }

    fn close(a: &CMatrix, b: &[f64]) -> bool {
        a.max_abs_diff(&CMatrix::from_real(a.rows(), a.cols(), b)) < 1e-14
    }

    #[test]
    fn hand_computed_operators() {
        let aj = build_aj(&quad(-1.0)).unwrap();
        assert_eq!(aj.labels, vec![(0, 0), (1, 0)]);
        assert!(close(&aj.matrix, &[0.0, 0.0, -0.5, 0.5]));
        let a = build_a(&quad(-1.0)).unwrap();
        assert!(!a.collided);
        assert!(close(&a.matrix, &[0.0, 0.0, -0.5, 0.5]));

        let aj = build_aj(&quad(-2.0)).unwrap();
        assert_eq!(aj.labels, vec![(1, 0), (2, 0)]);
        assert!(close(&aj.matrix, &[0.25, -0.25, -0.25, 0.25]));
        assert!(close(&build_a(&quad(-2.0)).unwrap().matrix, &[0.25, -0.25, -0.25, 0.25]));

        let a = build_a(&quad(0.0)).unwrap();
        assert_eq!(a.dim(), 1);
        assert!(close(&a.matrix, &[0.0]));
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&CMatrix::from_real(2, 2, &[0.5, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![(0.5, 0.0), (0.0, 0.0)]);
        assert!(!s.one_is_eigenvalue());
        let s = spectrum(&build_a(&quad(-1.0)).unwrap().matrix).unwrap();
        assert!((s.spectral_radius - 0.5).abs() < 1e-14);
    }

    #[test]
    fn planted_spectrum_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let planted: Vec<f64> = (0..n).map(|i| 0.9 - 0.2 * i as f64).collect();
        let s: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = CMatrix::from_real(n, n, &s);
        let lu = linalg::Lu::new(&s);
        // A = S diag S^{-1}, column by column
        let mut a = CMatrix::zeros(n, n);
        for col in 0..n {
            let e: Vec<C64> = (0..n).map(|i| cr(if i == col { 1.0 } else { 0.0 })).collect();
            let x = lu.solve(&e).unwrap();
            let dx: Vec<C64> = x.iter().zip(&planted).map(|(v, d)| v * d).collect();
            let y = s.mul_vec(&dx);
            for row in 0..n {
                a[(row, col)] = y[row];
            }
        }
        let sp = spectrum(&a).unwrap();
        let mut got: Vec<f64> = sp.eigenvalues.iter().map(|e| e.0).collect();
        got.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (g, p) in got.iter().zip(&planted) {
            assert!((g - p).abs() < 1e-8, "{g} vs {p}");
        }
        assert!(sp.eigenvalues.iter().all(|e| e.1.abs() < 1e-8));
    }

    #[test]
    fn identity_checks_on_quadratic_orbits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhos: Vec<C64> = (0..20)
            .map(|_| C64::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..6.3)))
            .chain([cr(0.0)])
            .collect();
        for c in [0.0, -1.0, -2.0, -1.754_877_666_246_693] {
            let r = char_identity_check(&quad(c), &rhos).unwrap();
            assert!(r.aj_deviation < 1e-10, "{c}: {r:?}");
            assert!(r.a_deviation.unwrap() < 1e-10);
        }
    }

    #[test]
    fn scaled_triple() {
        for (c, xi) in [(-1.0, 0.0), (-1.0, 0.25), (-1.754_877_666_246_693, 0.5), (-2.0, 0.3)] {
            let r = scaled_triple_check(&quad(c), xi).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let a = build_a(&quad(-1.0)).unwrap().matrix;
        let def = quad(-1.0).deformation().unwrap();
        let t = LinearizedTriple::new(&quad(-1.0), &def).unwrap().scaled(0.25);
        let s = build_aj_from(&quad(-1.0), &t).matrix;
        assert!(s.max_abs_diff(&a.scale(cr(4.0 / 3.0))) < 1e-15);
    }
}
