//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and fails on
//! `FAIL`. Tolerances are fixed constants below.

use std::f64::consts::{FRAC_PI_2, PI};

use kneadlab_core::families::{CoreMap, FamilyKind, FamilySpec};
use kneadlab_core::kneading::{kneading_scan, KneadingSequence, Order, DEFAULT_DELTA_HIT};
use kneadlab_core::linalg::C64;
use kneadlab_core::motionlab::{
    flat_geometry, iterate_lifts, lift_motion, make_orbit_motion, odd_constants,
    separation_check, theta_regular_check, GridSpec, MotionGrid, MotionMode, SectorParams,
};
use kneadlab_core::plmaps::{pl_ergodic, pl_from_values, pl_markov_matrix};
use kneadlab_core::roots::bisect;
use kneadlab_core::solver::{solve_superstable_1d, solve_word, superstable_parameters};
use kneadlab_core::transfer::{build_a, char_identity_check, spectrum};
use kneadlab_core::transversality::{
    marked_orbit, orbit_sum, positively_oriented, trans_sum, MarkedOrbit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORBIT_TOL: f64 = 1e-9;
const FD_REL_TOL: f64 = 1e-6;
const IDENTITY_TOL: f64 = 1e-9;
const ROBUST_GAP: f64 = 1e-6;
const EIGEN_SLACK: f64 = 1e-9;
const ONE_GAP: f64 = 1e-6;
const LIFT_DERIV_TOL: f64 = 1e-6;
const DECAY_TOL: f64 = 0.05;
const R_RESIDUAL_TOL: f64 = 1e-13;
const BETA_RESIDUAL_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-14;
const MARKOV_DET_TOL: f64 = 1e-9;

const PHI: f64 = 1.618_033_988_749_895;
const AIRPLANE: f64 = -1.754_877_666_246_693;
const LORENZ_PAIR: [f64; 2] = [1.324_717_957_244_749_2, -0.139_680_581_996_170_95];

fn report(id: usize, title: &str, ok: bool, detail: &str) {
    println!("{} criterion {id:>2} ({title}): {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn quad_orbit(c: f64) -> MarkedOrbit {
    marked_orbit(&FamilySpec::quadratic(), &[c], ORBIT_TOL).unwrap()
}

fn tent_orbit(t: f64) -> MarkedOrbit {
    marked_orbit(&FamilySpec::tent(), &[t - 1.0], ORBIT_TOL).unwrap()
}

fn lorenz_orbit(p: [f64; 2]) -> MarkedOrbit {
    let f = FamilySpec::new(FamilyKind::LorenzAffine).unwrap();
    marked_orbit(&f, &p, ORBIT_TOL).unwrap()
}

/// `d/dc f_c^q(0)` by the complex step, an independent check on the orbit sum.
fn complex_step_derivative(c: f64, q: usize) -> f64 {
    let h = 1e-20;
    let cc = C64::new(c, h);
    let mut z = C64::new(0.0, 0.0);
    for _ in 0..q {
        z = z * z + cc;
    }
    z.im / h
}

fn quadratic_superstables(max_q: usize) -> Vec<(f64, usize)> {
    superstable_parameters(&FamilySpec::quadratic(), max_q, (-2.0, 0.25), 1 << 22)
        .unwrap()
        .into_iter()
        .map(|s| (s.param, s.period))
        .collect()
}

#[test]
fn criterion_01_quadratic_transversality() {
    let found = quadratic_superstables(10);
    let want = [1, 1, 1, 2, 3, 5, 9, 16, 28, 51];
    let counts: Vec<usize> = (1..=10)
        .map(|q| found.iter().filter(|s| s.1 == q).count())
        .collect();
    let mut worst_rel: f64 = 0.0;
    let mut min_sum = f64::INFINITY;
    for &(c, q) in &found {
        let o = quad_orbit(c);
        let s = trans_sum(&o).unwrap();
        min_sum = min_sum.min(s);
        let mut prod = 1.0;
        let mut x = c;
        for _ in 1..q {
            prod *= 2.0 * x;
            x = x * x + c;
        }
        let fd = complex_step_derivative(c, q) / prod;
        worst_rel = worst_rel.max((fd - s).abs() / s.abs());
    }
    let anchor0 = trans_sum(&quad_orbit(0.0)).unwrap();
    let anchor1 = trans_sum(&quad_orbit(-1.0)).unwrap();
    let ok = counts == want
        && min_sum > 0.0
        && worst_rel <= FD_REL_TOL
        && (anchor0 - 1.0).abs() < 1e-14
        && (anchor1 - 0.5).abs() < 1e-14;
    report(
        1,
        "quadratic transversality",
        ok,
        &format!(
            "{} parameters, counts {counts:?}, min sum {min_sum:.3e}, worst FD rel {worst_rel:.2e}, sum(0) = {anchor0}, sum(-1) = {anchor1}",
            found.len()
        ),
    );
}

#[test]
fn criterion_02_characteristic_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rhos: Vec<C64> = (0..20)
        .map(|_| {
            let r: f64 = rng.gen_range(0.0..=1.0f64).sqrt();
            C64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let fixtures = [
        ("c=-1", quad_orbit(-1.0)),
        ("airplane", quad_orbit(AIRPLANE)),
        ("c=-2", quad_orbit(-2.0)),
        ("tent phi", tent_orbit(PHI)),
        ("lorenz pair", lorenz_orbit(LORENZ_PAIR)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, o) in &fixtures {
        let chk = char_identity_check(o, &rhos).unwrap();
        ok &= chk.aj_deviation <= IDENTITY_TOL && chk.samples == rhos.len();
        if let Some(d) = chk.a_deviation {
            ok &= d <= IDENTITY_TOL;
        }
        parts.push(format!("{name} {:.1e}", chk.aj_deviation));
    }
    report(2, "characteristic identity", ok, &parts.join(", "));
}

#[test]
fn criterion_03_spectral_conclusions() {
    let mut ok = true;
    let mut worst_quad: f64 = 0.0;
    for (c, _) in quadratic_superstables(6) {
        let s = spectrum(&build_a(&quad_orbit(c)).unwrap().matrix).unwrap();
        worst_quad = worst_quad.max(s.spectral_radius);
        ok &= s.spectral_radius <= 1.0 - ROBUST_GAP;
    }
    let mut parts = vec![format!("quadratic max radius {worst_quad:.4}")];
    let neutral = [
        ("lorenz pair", lorenz_orbit(LORENZ_PAIR)),
        ("symmetric lorenz", lorenz_orbit([PHI, 0.0])),
        ("tent phi", tent_orbit(PHI)),
        ("tent 2", tent_orbit(2.0)),
    ];
    for (name, o) in &neutral {
        let s = spectrum(&build_a(o).unwrap().matrix).unwrap();
        ok &= s.spectral_radius <= 1.0 + EIGEN_SLACK && s.dist_to_one > ONE_GAP;
        parts.push(format!(
            "{name} radius {:.4} |l-1| {:.3e}",
            s.spectral_radius, s.dist_to_one
        ));
    }
    report(3, "spectral conclusions", ok, &parts.join(", "));
}

#[test]
fn criterion_04_lift_operator_consistency() {
    let mut ok = true;
    let mut parts = Vec::new();
    let grid = GridSpec::new(16, 4, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for c in [-1.0, AIRPLANE] {
        let o = quad_orbit(c);
        let a = build_a(&o).unwrap();
        let v: Vec<C64> = (0..a.dim())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let m = MotionGrid::linear(&a.points, &v, &grid);
        let lifted = lift_motion(&o, &m).unwrap();
        let d = lifted.grid.derivative_at_zero();
        let av = a.matrix.mul_vec(&v);
        let err = d.iter().zip(&av).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        ok &= err <= LIFT_DERIV_TOL;
        parts.push(format!("c={c:.6} |h'(0) - Av| {err:.1e}"));
    }
    let grid = GridSpec::new(16, 24, 0.3).unwrap();
    let mut worst: f64 = 0.0;
    for (c, q) in quadratic_superstables(5) {
        if q == 1 {
            continue;
        }
        let o = quad_orbit(c);
        let radius = spectrum(&build_a(&o).unwrap().matrix).unwrap().spectral_radius;
        let m = make_orbit_motion(&o, 0.01, 7, &grid, MotionMode::Complex).unwrap();
        let rep = iterate_lifts(&o, &m, 40).unwrap();
        let rate = rep.rate.unwrap_or(f64::NAN);
        let dev = (rate - radius).abs();
        worst = worst.max(dev);
        ok &= dev <= DECAY_TOL;
    }
    parts.push(format!("worst |rate - radius| {worst:.3}"));
    report(4, "lift/operator consistency", ok, &parts.join(", "));
}

#[test]
fn criterion_05_monotonicity_scan() {
    let rows = kneading_scan(&FamilySpec::quadratic(), -2.0, 0.25, 2001, 40, DEFAULT_DELTA_HIT).unwrap();
    let decreases = rows.iter().filter(|r| r.prev_order == Some(Order::Greater)).count();
    let undecided = rows.iter().filter(|r| r.prev_order == Some(Order::UndecidedPrefix)).count();
    report(
        5,
        "monotonicity scan",
        rows.len() == 2001 && decreases == 0,
        &format!("{} rows, {decreases} decreases, {undecided} undecided", rows.len()),
    );
}

#[test]
fn criterion_06_odd_constants() {
    let mut ok = true;
    let mut min_margin = f64::INFINITY;
    let mut worst_residual: f64 = 0.0;
    for ell in (3..=31).step_by(2) {
        let k = odd_constants(ell).unwrap();
        ok &= k.residual <= R_RESIDUAL_TOL && k.margin > 0.0;
        min_margin = min_margin.min(k.margin);
        worst_residual = worst_residual.max(k.residual);
    }
    let k3 = odd_constants(3).unwrap();
    let (theta3, r3) = (k3.theta, k3.r);
    let lhs = 2.0 * r3 * (theta3 / 9.0).cos();
    let rhs = 2f64.sqrt() + 2f64.powf(1.0 / 6.0);
    ok &= lhs > 2.61 && rhs < 2.54;
    report(
        6,
        "odd-order constants",
        ok,
        &format!("min margin {min_margin:.4e}, worst residual {worst_residual:.1e}, l=3: {lhs:.4} > 2.61, {rhs:.4} < 2.54"),
    );
}

#[test]
fn criterion_07_flat_family() {
    let (ell, b) = (1.0, 6.0);
    let g = flat_geometry(ell, b).unwrap();
    let fam = FamilySpec::new(FamilyKind::FlatExp { ell, b }).unwrap();
    let sep = separation_check(&fam, &[-g.beta]);
    let found = superstable_parameters(&fam, 6, (-g.beta, -1e-6), 20_000).unwrap();
    let sums: Vec<f64> = found
        .iter()
        .filter_map(|s| marked_orbit(&fam, &[s.param], 1e-7).ok())
        .filter_map(|o| trans_sum(&o).ok())
        .collect();
    let positive = sums.iter().filter(|&&s| s > 0.0).count();
    let ok = g.beta_residual <= BETA_RESIDUAL_TOL
        && (g.expansion - 2.0 / g.beta).abs() < 1e-12
        && g.expansion > 2.0
        && sep.as_ref().map(|r| r.holds).unwrap_or(false)
        && g.diam_u < g.r
        && g.r < b
        && positive >= 1;
    report(
        7,
        "flat family",
        ok,
        &format!(
            "beta {:.6} (residual {:.1e}), Df = {:.4}, 2x0 = {:.4} < R = {:.4} < b, {positive}/{} superstable sums positive",
            g.beta, g.beta_residual, g.expansion, g.diam_u, g.r, sums.len()
        ),
    );
}

#[test]
fn criterion_08_class_e() {
    let fam = FamilySpec::new(FamilyKind::MultiplicativeClassE { core: CoreMap::Sin }).unwrap();
    let o1 = marked_orbit(&fam, &[FRAC_PI_2], ORBIT_TOL).unwrap();
    let s1 = orbit_sum(&o1.orbits[0]);
    let a2 = solve_superstable_1d(&fam, 2, (2.0, 3.0)).unwrap();
    let oracle = bisect(|a| a * a.sin() - FRAC_PI_2, 2.0, 3.0).unwrap();
    let o2 = marked_orbit(&fam, &[a2], ORBIT_TOL).unwrap();
    let s2 = orbit_sum(&o2.orbits[0]);
    let (oriented, quotient) = positively_oriented(&o2, &o2.deformation().unwrap()).unwrap();
    let ok = (s1 - 1.0).abs() < 1e-14 && (a2 - oracle).abs() < 1e-10 && s2 > 0.0 && oriented;
    report(
        8,
        "class E sine family",
        ok,
        &format!("sum(pi/2) = {s1}, q=2 at a = {a2:.10} (oracle {oracle:.10}), sum = {s2:.6}, oriented quotient {quotient:.6}"),
    );
}

#[test]
fn criterion_09_piecewise_linear() {
    let mut ok = true;
    let mut worst_trip: f64 = 0.0;
    for (eps, kappa, v) in [
        (1, vec![1.0, 1.0], vec![PHI - 1.0]),
        (1, vec![1.0, 2.0, 0.5], vec![0.7, -0.4]),
        (-1, vec![0.5, 1.5, 1.0], vec![-0.6, 0.2]),
    ] {
        let g = pl_from_values(eps, kappa, v.clone()).unwrap();
        for (a, b) in g.extremal_values().iter().zip(&v) {
            worst_trip = worst_trip.max((a - b).abs());
        }
    }
    ok &= worst_trip <= ROUND_TRIP_TOL;
    let tent_phi = pl_from_values(1, vec![1.0, 1.0], vec![PHI - 1.0]).unwrap();
    let ergodic = pl_ergodic(&tent_phi).unwrap();
    ok &= ergodic;
    let mut worst_det: f64 = 0.0;
    for t in [PHI, 2.0] {
        let rep = pl_markov_matrix(&pl_from_values(1, vec![1.0, 1.0], vec![t - 1.0]).unwrap()).unwrap();
        worst_det = worst_det.max(rep.det.abs());
    }
    ok &= worst_det <= MARKOV_DET_TOL;
    let o = tent_orbit(PHI);
    let (positive, quotient) = positively_oriented(&o, &o.deformation().unwrap()).unwrap();
    ok &= positive;
    report(
        9,
        "piecewise-linear suite",
        ok,
        &format!("round trip {worst_trip:.1e}, tent phi ergodic {ergodic}, worst Markov det {worst_det:.1e}, oriented quotient {quotient:.4}"),
    );
}

#[test]
fn criterion_10_main_lemma_numerics() {
    let ell = 60.0;
    let theta = 0.05;
    let fam = FamilySpec::new(FamilyKind::PowerLaw { ell_minus: ell, ell_plus: ell }).unwrap();
    // leftmost parameter with a bounded critical orbit
    let c_min = bisect(
        |c: f64| {
            let beta = bisect(|b: f64| b.powf(ell) + c - b, 1.0, 1.2).unwrap();
            c.abs().powf(ell) + c - beta
        },
        -1.2,
        -1.0,
    )
    .unwrap();
    let word = KneadingSequence::parse("-++0").unwrap();
    let c = solve_word(&fam, &word, (c_min, 0.0), DEFAULT_DELTA_HIT).unwrap();
    let o = marked_orbit(&fam, &[c], ORBIT_TOL).unwrap();
    let grid = GridSpec::new(16, 24, 0.1).unwrap();
    let full = SectorParams::new(theta, ell).unwrap();
    let half = SectorParams::new(theta / 2.0, ell).unwrap();
    let mut h = make_orbit_motion(&o, 1e-3, 10, &grid, MotionMode::Complex).unwrap();
    let q = word.len();
    let mut ok = theta_regular_check(&h, &full).regular;
    let mut margins = Vec::new();
    for _ in 0..q {
        h = lift_motion(&o, &h).unwrap().grid;
        let r = theta_regular_check(&h, &full);
        ok &= r.regular;
        margins.push(r.a1_margin.min(r.a2_margin));
    }
    let last = theta_regular_check(&h, &half);
    ok &= last.regular;
    report(
        10,
        "power-law lift regularity",
        ok,
        &format!(
            "c = {c:.12}, q = {q}, min margins {:?}, q-th lift at theta/2: A1 {:.3e}, A2 {:.3e}",
            margins.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>(),
            last.a1_margin,
            last.a2_margin
        ),
    );
}
