//! Sampled holomorphic motions of `g(P)` over a disk, their lifts, and the
//! geometric predicates on motions.

mod odd;
mod sectors;
mod separation;

pub use odd::{admissible_check, odd_constants, odd_lift, AdmissibleReport, OddConstants, OddOrbit};
pub use sectors::{angle_at, in_angle_domain, theta_regular_check, SectorParams, ThetaReport};
pub use separation::{flat_beta, flat_geometry, separation_check, FlatGeometry, SeparationReport};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Deformation, FamilyKind, SidedPoint};
use crate::linalg::C64;
use crate::transfer::{orbit_point_set, OrbitPointSet};
use crate::transversality::MarkedOrbit;

pub const MAX_REFINEMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rays: usize,
    pub radii: usize,
    pub r_max: f64,
}

impl GridSpec {
    pub fn new(rays: usize, radii: usize, r_max: f64) -> Result<Self> {
        if rays == 0 || radii == 0 || !(r_max > 0.0) {
            return Err(Error::InvalidArgument("grid needs rays, radii and r_max > 0".into()));
        }
        Ok(GridSpec { rays, radii, r_max })
    }

    pub fn radii(&self) -> Vec<f64> {
        (1..=self.radii)
            .map(|k| self.r_max * k as f64 / self.radii as f64)
            .collect()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rays: 16,
            radii: 24,
            r_max: 0.1,
        }
    }
}

/// Values `h_lambda(x)` for `lambda = r_k e^{2 pi i a / N}`; at `lambda = 0` every
/// point sits at its base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionGrid {
    pub points: Vec<f64>,
    pub labels: Vec<String>,
    pub rays: usize,
    pub radii: Vec<f64>,
    /// `values[point][ray][radius]`.
    pub values: Vec<Vec<Vec<C64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionMode {
    Real,
    Complex,
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

impl MotionGrid {
    /// Motion given by a function of `(point index, lambda)`.
    pub fn from_fn(
        points: &[f64],
        labels: Vec<String>,
        grid: &GridSpec,
        f: impl Fn(usize, C64) -> C64,
    ) -> Self {
        let radii = grid.radii();
        let values = (0..points.len())
            .map(|p| {
                (0..grid.rays)
                    .map(|a| radii.iter().map(|&r| f(p, lambda_at(grid.rays, a, r))).collect())
                    .collect()
            })
            .collect();
        MotionGrid {
            points: points.to_vec(),
            labels,
            rays: grid.rays,
            radii,
            values,
        }
    }

    pub fn identity(points: &[f64], grid: &GridSpec) -> Self {
        Self::from_fn(points, default_labels(points.len()), grid, |p, _| {
            C64::new(points[p], 0.0)
        })
    }

    /// `h_lambda(x) = x + lambda v(x)`.
    pub fn linear(points: &[f64], v: &[C64], grid: &GridSpec) -> Self {
        Self::from_fn(points, default_labels(points.len()), grid, |p, l| {
            points[p] + l * v[p]
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lambda(&self, ray: usize, k: usize) -> C64 {
        lambda_at(self.rays, ray, self.radii[k])
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            rays: self.rays,
            radii: self.radii.len(),
            r_max: *self.radii.last().unwrap_or(&0.0),
        }
    }

    /// `max |h_lambda(x) - x|` over all samples.
    pub fn sup_distance(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.points)
            .flat_map(|(v, &x)| v.iter().flatten().map(move |z| (z - x).norm()))
            .fold(0.0, f64::max)
    }

    /// Smallest distance between two moving points over all samples.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min((self.points[i] - self.points[j]).abs());
                for a in 0..self.rays {
                    for k in 0..self.radii.len() {
                        best = best.min((self.values[i][a][k] - self.values[j][a][k]).norm());
                    }
                }
            }
        }
        best
    }

    /// Largest imaginary part on rays along the real axis.
    pub fn max_imag_on_real_axis(&self) -> f64 {
        let real_rays: Vec<usize> = (0..self.rays)
            .filter(|&a| (2 * a) % self.rays == 0)
            .collect();
        let mut worst: f64 = 0.0;
        for v in &self.values {
            for &a in &real_rays {
                for z in &v[a] {
                    worst = worst.max(z.im.abs());
                }
            }
        }
        worst
    }

    /// `d/d lambda h_lambda(x)` at 0 from the Cauchy integral over all rays on
    /// the smallest circle.
    pub fn derivative_at_zero(&self) -> Vec<C64> {
        let r = self.radii[0];
        let n = self.rays as f64;
        (0..self.len())
            .map(|p| {
                (0..self.rays)
                    .map(|a| (self.values[p][a][0] - self.points[p]) / self.lambda(a, 0))
                    .sum::<C64>()
                    / n
            })
            .map(|z| if r > 0.0 { z } else { C64::new(f64::NAN, 0.0) })
            .collect()
    }
}

fn lambda_at(rays: usize, a: usize, r: f64) -> C64 {
    // keep the real rays exactly real
    match (4 * a) % (4 * rays) {
        0 => C64::new(r, 0.0),
        x if x == 2 * rays => C64::new(-r, 0.0),
        _ => C64::from_polar(r, 2.0 * PI * a as f64 / rays as f64),
    }
}

/// Random motion `x + lambda v(x) (+ lambda^2 u(x))` with `v, u` drawn from
/// `[-sigma, sigma]` (real mode) or the square of that size (complex mode).
pub fn make_motion(
    points: &[f64],
    labels: Vec<String>,
    sigma: f64,
    seed: u64,
    grid: &GridSpec,
    mode: MotionMode,
    second_order: bool,
) -> Result<MotionGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        if sigma == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let re = rng.gen_range(-sigma..=sigma);
        let im = match mode {
            MotionMode::Real => 0.0,
            MotionMode::Complex => rng.gen_range(-sigma..=sigma),
        };
        C64::new(re, im)
    };
    let v: Vec<C64> = points.iter().map(|_| draw(&mut rng)).collect();
    let u: Vec<C64> = points
        .iter()
        .map(|_| if second_order { draw(&mut rng) } else { C64::new(0.0, 0.0) })
        .collect();
    let m = MotionGrid::from_fn(points, labels, grid, |p, l| points[p] + l * v[p] + l * l * u[p]);
    if points.len() > 1 && !(m.min_separation() > 1e-12) {
        return Err(Error::InjectivityLost(m.min_separation()));
    }
    Ok(m)
}

/// Random motion of the points of `g(P)` of a marked orbit.
pub fn make_orbit_motion(
    orbit: &MarkedOrbit,
    sigma: f64,
    seed: u64,
    grid: &GridSpec,
    mode: MotionMode,
) -> Result<MotionGrid> {
    let set = orbit_point_set(orbit)?;
    make_motion(&set.values(), point_labels(&set), sigma, seed, grid, mode, false)
}

pub fn point_labels(set: &OrbitPointSet) -> Vec<String> {
    set.labels.iter().map(|(i, j)| format!("c{i},{j}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftResult {
    pub grid: MotionGrid,
    /// Largest `|G(h^) - h(g(x))| / (1 + |h(g(x))|)`.
    pub max_residual: f64,
    /// Number of step halvings needed by the continuation.
    pub refinements: usize,
}

struct Lifter<'a> {
    def: Deformation,
    set: OrbitPointSet,
    power_law: Option<(f64, f64)>,
    motion: &'a MotionGrid,
}

impl Lifter<'_> {
    fn w_at(&self, ray: usize, k: Option<usize>) -> Vec<C64> {
        self.set
            .c1_index
            .iter()
            .map(|&i| self.value(i, ray, k))
            .collect()
    }

    fn value(&self, p: usize, ray: usize, k: Option<usize>) -> C64 {
        match k {
            None => C64::new(self.motion.points[p], 0.0),
            Some(k) => self.motion.values[p][ray][k],
        }
    }

    fn anchor(&self, p: usize) -> SidedPoint {
        self.set.points[p]
    }

    /// One ray of the lift; returns values per point per radius.
    fn ray(&self, ray: usize) -> Result<(Vec<Vec<C64>>, f64, usize)> {
        let n = self.set.len();
        let m = self.motion.radii.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); m]; n];
        let mut max_res: f64 = 0.0;
        let mut refinements = 0;
        let mut z: Vec<C64> = self.set.points.iter().map(|p| C64::new(p.value, 0.0)).collect();
        for k in 0..m {
            let prev_k = if k == 0 { None } else { Some(k - 1) };
            let (w0, w1) = (self.w_at(ray, prev_k), self.w_at(ray, Some(k)));
            let p = self.def.p(&w1)?;
            for x in 0..n {
                if let Some(j) = self.set.marked[x] {
                    out[x][k] = p[j];
                    continue;
                }
                let img = self.set.image[x].unwrap();
                let (t0, t1) = (self.value(img, ray, prev_k), self.value(img, ray, Some(k)));
                let (zk, res, refs) = match self.power_law {
                    Some(ells) => self.closed_form(x, &w1, t1, ells)?,
                    None => self.continue_root(x, z[x], (&w0, &w1), (t0, t1))?,
                };
                z[x] = zk;
                out[x][k] = zk;
                max_res = max_res.max(res);
                refinements += refs;
            }
        }
        Ok((out, max_res, refinements))
    }

    fn closed_form(&self, x: usize, w: &[C64], t: C64, ells: (f64, f64)) -> Result<(C64, f64, usize)> {
        let xv = self.set.points[x].value;
        let d = t - w[0];
        if d.norm() == 0.0 {
            return Err(Error::TargetHitSingularValue(xv));
        }
        let z = if xv > 0.0 {
            d.powf(1.0 / ells.1)
        } else {
            -d.powf(1.0 / ells.0)
        };
        let g = self.def.g(w, z, self.anchor(x))?;
        Ok((z, (g - t).norm() / (1.0 + t.norm()), 0))
    }

    /// Follows the root of `G_w(z) = t` along the straight homotopy between
    /// consecutive samples, halving the step when the corrector strays.
    fn continue_root(
        &self,
        x: usize,
        mut z: C64,
        (w0, w1): (&[C64], &[C64]),
        (t0, t1): (C64, C64),
    ) -> Result<(C64, f64, usize)> {
        let anchor = self.anchor(x);
        let dw: Vec<C64> = w1.iter().zip(w0).map(|(a, b)| a - b).collect();
        let dt = t1 - t0;
        let at = |s: f64| -> (Vec<C64>, C64) {
            (w0.iter().zip(&dw).map(|(a, d)| a + d * s).collect(), t0 + dt * s)
        };
        let (mut s, mut ds) = (0.0f64, 1.0f64);
        let mut halvings = 0;
        while s < 1.0 {
            let s1 = (s + ds).min(1.0);
            let (ws, _) = at(s);
            let (_, gz, gw) = self.def.g_full(&ws, z, anchor)?;
            if gz.norm() < 1e-12 {
                return Err(Error::SingularLift(anchor.value));
            }
            let dzds = (dt - gw.iter().zip(&dw).map(|(a, b)| a * b).sum::<C64>()) / gz;
            let pred = z + dzds * (s1 - s);
            let (w1s, t1s) = at(s1);
            let ok = match newton(&self.def, &w1s, t1s, pred, anchor) {
                Ok(zn) if (zn - pred).norm() <= 3.0 * (pred - z).norm() + 1e-13 * (1.0 + z.norm()) => {
                    Some(zn)
                }
                _ => None,
            };
            match ok {
                Some(zn) => {
                    z = zn;
                    s = s1;
                }
                None => {
                    halvings += 1;
                    if halvings > MAX_REFINEMENTS {
                        return Err(Error::BranchJump(format!(
                            "lift of {} lost its branch",
                            anchor.value
                        )));
                    }
                    ds *= 0.5;
                }
            }
        }
        let (g, gz, _) = self.def.g_full(w1, z, anchor)?;
        if gz.norm() < 1e-12 {
            return Err(Error::SingularLift(anchor.value));
        }
        Ok((z, (g - t1).norm() / (1.0 + t1.norm()), halvings))
    }
}

fn newton(def: &Deformation, w: &[C64], t: C64, mut z: C64, anchor: SidedPoint) -> Result<C64> {
    for _ in 0..60 {
        let (g, gz, _) = def.g_full(w, z, anchor)?;
        if gz.norm() < 1e-300 {
            return Err(Error::SingularLift(anchor.value));
        }
        let step = (g - t) / gz;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NoConvergence);
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence)
}

/// Lift of a motion of `g(P)`: marked points follow `p(c_1(lambda))`, other
/// points solve `G_{c_1(lambda)}(h^(x)) = h(g(x))` on the branch through `x`.
pub fn lift_motion(orbit: &MarkedOrbit, grid: &MotionGrid) -> Result<LiftResult> {
    let set = orbit_point_set(orbit)?;
    if set.len() != grid.len()
        || set
            .points
            .iter()
            .zip(&grid.points)
            .any(|(a, &b)| (a.value - b).abs() > 1e-12 * (1.0 + b.abs()))
    {
        return Err(Error::WrongShape("motion is not a motion of g(P)".into()));
    }
    let power_law = match orbit.family.kind() {
        FamilyKind::PowerLaw {
            ell_minus,
            ell_plus,
        } => Some((*ell_minus, *ell_plus)),
        _ => None,
    };
    let lifter = Lifter {
        def: orbit.deformation()?,
        set,
        power_law,
        motion: grid,
    };
    let rays: Vec<(Vec<Vec<C64>>, f64, usize)> = (0..grid.rays)
        .into_par_iter()
        .map(|a| lifter.ray(a))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut values = vec![Vec::with_capacity(grid.rays); n];
    let mut max_residual: f64 = 0.0;
    let mut refinements = 0;
    for (vals, res, refs) in rays {
        for (x, v) in vals.into_iter().enumerate() {
            values[x].push(v);
        }
        max_residual = max_residual.max(res);
        refinements += refs;
    }
    Ok(LiftResult {
        grid: MotionGrid {
            points: grid.points.clone(),
            labels: grid.labels.clone(),
            rays: grid.rays,
            radii: grid.radii.clone(),
            values,
        },
        max_residual,
        refinements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateReport {
    /// `d_k = max |h^(k) - id|`, starting with the input motion.
    pub distances: Vec<f64>,
    /// `exp` of the log-linear slope fitted to the tail.
    pub rate: Option<f64>,
    pub max_residual: f64,
}

/// Successive lifts `h^(1), ..., h^(k)` and their distances to the identity.
pub fn iterate_lifts(orbit: &MarkedOrbit, motion: &MotionGrid, k: usize) -> Result<IterateReport> {
    if k > 200 {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds 200")));
    }
    let mut current = motion.clone();
    let mut distances = vec![current.sup_distance()];
    let mut max_residual: f64 = 0.0;
    let mut growth = 0;
    for _ in 0..k {
        let lifted = lift_motion(orbit, &current)?;
        max_residual = max_residual.max(lifted.max_residual);
        current = lifted.grid;
        let d = current.sup_distance();
        let last = *distances.last().unwrap();
        growth = if d > 2.0 * last && last > 0.0 { growth + 1 } else { 0 };
        distances.push(d);
        if growth >= 5 {
            return Err(Error::DivergenceDetected(d));
        }
    }
    let scale = 1.0 + motion.points.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(IterateReport {
        rate: decay_rate(&distances, 1e-12 * scale),
        distances,
        max_residual,
    })
}

/// Least-squares slope of `log d_k` over the tail, ignoring entries under the
/// noise floor.
pub fn decay_rate(d: &[f64], floor: f64) -> Option<f64> {
    let valid: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &x)| x > floor)
        .map(|(i, &x)| (i as f64, x.ln()))
        .collect();
    if valid.is_empty() {
        return if d.iter().skip(1).all(|&x| x <= floor) { Some(0.0) } else { None };
    }
    let half = d.len() / 2;
    let tail: Vec<(f64, f64)> = valid.iter().copied().filter(|(i, _)| *i >= half as f64).collect();
    let pts = if tail.len() >= 3 {
        tail
    } else {
        let take = valid.len().min(valid.len().div_ceil(2).max(3));
        valid[valid.len() - take..].to_vec()
    };
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{CoreMap, FamilySpec};
    use crate::transfer::{build_a, spectrum};
    use crate::transversality::marked_orbit;

    fn quad(c: f64) -> MarkedOrbit {
        marked_orbit(&FamilySpec::quadratic(), &[c], 1e-9).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(16, 24, 0.3).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = make_motion(&[0.0, -1.0], default_labels(2), 0.0, 1, &grid(), MotionMode::Real, false)
            .unwrap();
        assert_eq!(m.sup_distance(), 0.0);
        assert_eq!(m, MotionGrid::identity(&[0.0, -1.0], &grid()));
    }

    #[test]
    fn motions_are_deterministic_and_real() {
        let a = make_motion(&[0.0, -1.0], default_labels(2), 0.01, 1, &grid(), MotionMode::Real, true)
            .unwrap();
        let b = make_motion(&[0.0, -1.0], default_labels(2), 0.01, 1, &grid(), MotionMode::Real, true)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_imag_on_real_axis(), 0.0);
        assert!(matches!(
            make_motion(&[0.0, 1e-15], default_labels(2), 0.0, 1, &grid(), MotionMode::Real, false),
            Err(Error::InjectivityLost(_))
        ));
    }

    #[test]
    fn lift_of_identity_is_identity() {
        for c in [-1.0, -2.0, -1.754_877_666_246_693] {
            let o = quad(c);
            let pts = orbit_point_set(&o).unwrap().values();
            let id = MotionGrid::identity(&pts, &grid());
            let l = lift_motion(&o, &id).unwrap();
            assert!(l.grid.sup_distance() < 1e-15, "{c}");
        }
    }

    #[test]
    fn lift_derivative_is_the_transfer_operator() {
        let o = quad(-1.754_877_666_246_693);
        let a = build_a(&o).unwrap().matrix;
        let pts = orbit_point_set(&o).unwrap().values();
        let n = pts.len();
        for col in 0..n {
            let v: Vec<C64> = (0..n)
                .map(|i| C64::new(if i == col { 0.01 } else { 0.0 }, 0.0))
                .collect();
            let m = MotionGrid::linear(&pts, &v, &GridSpec::new(16, 4, 0.05).unwrap());
            let l = lift_motion(&o, &m).unwrap();
            assert!(l.max_residual < 1e-11);
            let d = l.grid.derivative_at_zero();
            for row in 0..n {
                let want = a[(row, col)] * 0.01;
                assert!((d[row] - want).norm() < 1e-8, "({row},{col}) {} vs {want}", d[row]);
            }
        }
    }

    #[test]
    fn real_motions_lift_to_real_motions() {
        let o = quad(-1.0);
        let m = make_orbit_motion(&o, 0.01, 7, &grid(), MotionMode::Real).unwrap();
        let l = lift_motion(&o, &m).unwrap();
        assert!(l.grid.max_imag_on_real_axis() <= 1e-12);
    }

    #[test]
    fn sine_keeps_the_critical_point_fixed() {
        let sin = FamilySpec::new(FamilyKind::MultiplicativeClassE { core: CoreMap::Sin }).unwrap();
        let o = marked_orbit(&sin, &[PI / 2.0], 1e-9).unwrap();
        let m = make_orbit_motion(&o, 0.01, 3, &grid(), MotionMode::Complex).unwrap();
        let l = lift_motion(&o, &m).unwrap();
        let set = orbit_point_set(&o).unwrap();
        let c = set.marked.iter().position(|m| m.is_some()).unwrap();
        for v in l.grid.values[c].iter().flatten() {
            assert!((v - PI / 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn decay_matches_spectral_radius() {
        let o = quad(-1.0);
        let m = make_orbit_motion(&o, 0.01, 1, &grid(), MotionMode::Real).unwrap();
        let r = iterate_lifts(&o, &m, 40).unwrap();
        let rho = spectrum(&build_a(&o).unwrap().matrix).unwrap().spectral_radius;
        assert!((r.rate.unwrap() - rho).abs() < 0.05, "{:?}", r.rate);
        let id = MotionGrid::identity(&m.points, &grid());
        let r = iterate_lifts(&o, &id, 5).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn decay_fit() {
        let d: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        assert!((decay_rate(&d, 1e-300).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(decay_rate(&[1.0, 0.0, 0.0], 1e-12), Some(0.0));
    }
}
