use anyhow::{anyhow, bail, Context, Result};
use kneadlab_core::error::Error;
use kneadlab_core::families::FamilySpec;
use kneadlab_core::kneading::{
    kneading, kneading_scan, mt_compare_seq, KneadingSequence, Order, DEFAULT_DELTA_HIT,
};
use kneadlab_core::motionlab::{
    iterate_lifts, lift_motion, make_orbit_motion, odd_constants, separation_check,
    theta_regular_check, GridSpec, MotionMode, SectorParams,
};
use kneadlab_core::plmaps::{lorenz_r, pl_ergodic, pl_from_values, pl_markov_matrix};
use kneadlab_core::solver::{solve_2d, solve_word, superstable_parameters, CriticalRelation};
use kneadlab_core::transfer::{build_a, spectrum as spectrum_of};
use kneadlab_core::transversality::{
    marked_orbit, orbit_sum, positively_oriented, trans_sum, MarkedOrbit,
};
use serde_json::{json, Value};

use crate::family::{default_bracket, resolve};
use crate::output::Report;
use crate::{FamilyArgs, GridArgs, ParamArgs};

fn family_of(fam: &FamilyArgs, report: &mut Report) -> Result<FamilySpec> {
    let f = resolve(fam.family.as_deref(), fam.family_json.as_deref(), fam.ell)?;
    report.knob("family", serde_json::to_value(f.kind())?);
    Ok(f)
}

fn bracket(
    family: &FamilySpec,
    from: Option<f64>,
    to: Option<f64>,
    report: &mut Report,
) -> Result<(f64, f64)> {
    let d = default_bracket(family);
    let lo = from.or(d.map(|b| b.0));
    let hi = to.or(d.map(|b| b.1));
    match (lo, hi) {
        (Some(lo), Some(hi)) if lo < hi => {
            report.knob("from", lo);
            report.knob("to", hi);
            Ok((lo, hi))
        }
        (Some(lo), Some(hi)) => bail!("empty bracket [{lo}, {hi}]"),
        _ => bail!("no default bracket for {}; give --from and --to", family.name()),
    }
}

fn param_value(p: &[f64]) -> Value {
    if p.len() == 1 {
        json!(p[0])
    } else {
        json!(p)
    }
}

/// Parameter sets from `--param`, or every superstable parameter of `--period`.
fn parameter_sets(family: &FamilySpec, p: &ParamArgs, report: &mut Report) -> Result<Vec<Vec<f64>>> {
    let dim = family.param_dim();
    if !p.param.is_empty() {
        if p.period.is_some() {
            bail!("give either --param or --period");
        }
        return if dim == 1 {
            Ok(p.param.iter().map(|&c| vec![c]).collect())
        } else if p.param.len() == dim {
            Ok(vec![p.param.clone()])
        } else {
            bail!("{} needs {dim} parameters", family.name())
        };
    }
    let Some(q) = p.period else {
        bail!("give --param or --period");
    };
    let b = bracket(family, p.from, p.to, report)?;
    report.knob("period", q);
    report.knob("steps", p.steps);
    Ok(superstable_parameters(family, q, b, p.steps)?
        .into_iter()
        .filter(|s| s.period == q)
        .map(|s| vec![s.param])
        .collect())
}

fn orbit_tol(family: &FamilySpec, tol: Option<f64>, report: &mut Report) -> f64 {
    let t = tol.unwrap_or_else(|| family.closure_tol());
    report.knob("tol", t);
    t
}

fn periods(o: &MarkedOrbit) -> Value {
    json!(o.orbits.iter().map(|c| c.q).collect::<Vec<_>>())
}

pub fn solve(
    fam: &FamilyArgs,
    period: Option<usize>,
    word: Option<&str>,
    from: Option<f64>,
    to: Option<f64>,
    steps: usize,
) -> Result<Report> {
    let mut r = Report::new("solve");
    let family = family_of(fam, &mut r)?;
    let b = bracket(&family, from, to, &mut r)?;
    match (period, word) {
        (Some(q), None) => {
            r.knob("period", q);
            r.knob("steps", steps);
            let found = superstable_parameters(&family, q, b, steps)?;
            for s in found.iter().filter(|s| s.period == q) {
                r.records.push(json!({"param": s.param, "period": s.period, "residual": s.residual}));
            }
            r.plot = vec![found
                .iter()
                .filter(|s| s.period == q)
                .enumerate()
                .map(|(i, s)| (i as f64, s.param))
                .collect()];
        }
        (None, Some(w)) => {
            let word = KneadingSequence::parse(w)?;
            r.knob("word", word.to_string());
            r.knob("delta_hit", DEFAULT_DELTA_HIT);
            let c = solve_word(&family, &word, b, DEFAULT_DELTA_HIT)?;
            r.records.push(json!({"param": c, "word": word.to_string()}));
            r.plot = vec![vec![(0.0, c)]];
        }
        _ => bail!("give exactly one of --period and --word"),
    }
    Ok(r)
}

pub fn knead(fam: &FamilyArgs, params: &[f64], steps: usize) -> Result<Report> {
    let mut r = Report::new("knead");
    let family = family_of(fam, &mut r)?;
    r.knob("steps", steps);
    r.knob("delta_hit", DEFAULT_DELTA_HIT);
    let sets: Vec<Vec<f64>> = if family.param_dim() == 1 {
        params.iter().map(|&c| vec![c]).collect()
    } else {
        vec![params.to_vec()]
    };
    for p in sets {
        let k = kneading(&family, &p, steps, DEFAULT_DELTA_HIT)?;
        r.records.push(json!({"param": param_value(&p), "word": k.to_string()}));
    }
    Ok(r)
}

fn order_key(o: Order) -> std::cmp::Ordering {
    match o {
        Order::Less => std::cmp::Ordering::Less,
        Order::Greater => std::cmp::Ordering::Greater,
        Order::Equal | Order::UndecidedPrefix => std::cmp::Ordering::Equal,
    }
}

pub fn scan(fam: &FamilyArgs, from: f64, to: f64, steps: usize, prefix: usize) -> Result<Report> {
    let mut r = Report::new("scan");
    let family = family_of(fam, &mut r)?;
    r.knob("from", from);
    r.knob("to", to);
    r.knob("steps", steps);
    r.knob("prefix", prefix);
    r.knob("delta_hit", DEFAULT_DELTA_HIT);
    let rows = kneading_scan(&family, from, to, steps, prefix, DEFAULT_DELTA_HIT)?;
    let mut distinct: Vec<&KneadingSequence> = Vec::new();
    for row in &rows {
        if !distinct.contains(&&row.word) {
            distinct.push(&row.word);
        }
    }
    distinct.sort_by(|a, b| {
        order_key(mt_compare_seq(a, b)).then_with(|| a.to_string().cmp(&b.to_string()))
    });
    let mut decreases = 0;
    let mut undecided = 0;
    for row in &rows {
        match row.prev_order {
            Some(Order::Greater) => decreases += 1,
            Some(Order::UndecidedPrefix) => undecided += 1,
            _ => {}
        }
        r.records.push(json!({
            "param": row.param,
            "word": row.word.to_string(),
            "prev_order": row.prev_order.map(|o| o.as_str()),
        }));
    }
    r.plot = vec![rows
        .iter()
        .map(|row| {
            let rank = distinct.iter().position(|w| *w == &row.word).unwrap_or(0);
            (row.param, rank as f64)
        })
        .collect()];
    r.note("decreases", decreases);
    r.note("undecided", undecided);
    r.note("distinct_words", distinct.len());
    r.verdict = Some(decreases == 0);
    Ok(r)
}

pub fn trans(fam: &FamilyArgs, p: &ParamArgs) -> Result<Report> {
    let mut r = Report::new("trans");
    let family = family_of(fam, &mut r)?;
    let tol = orbit_tol(&family, p.tol, &mut r);
    let sets = parameter_sets(&family, p, &mut r)?;
    let mut all_ok = true;
    for params in sets {
        let o = marked_orbit(&family, &params, tol)?;
        let sum = match trans_sum(&o) {
            Ok(s) => Some(s),
            Err(Error::WrongShape(_)) if o.nu() == 1 => Some(orbit_sum(&o.orbits[0])),
            Err(Error::WrongShape(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let def = o.deformation()?;
        let (positive, quotient, note) = match positively_oriented(&o, &def) {
            Ok((pos, q)) => (pos, q, Value::Null),
            Err(Error::ZeroDeterminant(q)) => (false, q, json!("zero determinant")),
            Err(e) => return Err(e.into()),
        };
        let ok = positive && sum.map_or(true, |s| s > 0.0);
        all_ok &= ok;
        r.records.push(json!({
            "param": param_value(&params),
            "periods": periods(&o),
            "trans_sum": sum,
            "quotient": quotient,
            "positive": ok,
            "note": note,
        }));
    }
    r.verdict = Some(all_ok);
    Ok(r)
}

pub fn spectrum(fam: &FamilyArgs, p: &ParamArgs) -> Result<Report> {
    let mut r = Report::new("spectrum");
    let family = family_of(fam, &mut r)?;
    let tol = orbit_tol(&family, p.tol, &mut r);
    let sets = parameter_sets(&family, p, &mut r)?;
    let mut no_one = true;
    for params in sets {
        let o = marked_orbit(&family, &params, tol)?;
        let a = build_a(&o)?;
        let s = spectrum_of(&a.matrix)?;
        no_one &= !s.one_is_eigenvalue();
        r.plot.push(s.eigenvalues.clone());
        r.records.push(json!({
            "param": param_value(&params),
            "dim": s.dim,
            "spectral_radius": s.spectral_radius,
            "dist_to_one": s.dist_to_one,
            "one_is_eigenvalue": s.one_is_eigenvalue(),
            "backward_error": s.backward_error,
            "collided": a.collided,
            "eigenvalues": s.eigenvalues.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
        }));
    }
    r.verdict = Some(no_one);
    Ok(r)
}

fn grid_of(g: &GridArgs, sigma_default: f64, r: &mut Report) -> Result<(GridSpec, f64, MotionMode)> {
    let grid = GridSpec::new(g.rays, g.radii, g.rmax)?;
    let sigma = g.sigma.unwrap_or(sigma_default);
    let mode = if g.real { MotionMode::Real } else { MotionMode::Complex };
    r.knob("rays", g.rays);
    r.knob("radii", g.radii);
    r.knob("rmax", g.rmax);
    r.knob("seed", g.seed);
    r.knob("sigma", sigma);
    r.knob("mode", if g.real { "real" } else { "complex" });
    Ok((grid, sigma, mode))
}

pub fn lift(
    fam: &FamilyArgs,
    params: &[f64],
    g: &GridArgs,
    iterations: usize,
    tol: Option<f64>,
) -> Result<Report> {
    let mut r = Report::new("lift");
    let family = family_of(fam, &mut r)?;
    let tol = orbit_tol(&family, tol, &mut r);
    r.knob("param", param_value(params));
    r.knob("iterations", iterations);
    let (grid, sigma, mode) = grid_of(g, 0.01, &mut r)?;
    let o = marked_orbit(&family, params, tol)?;
    let m = make_orbit_motion(&o, sigma, g.seed, &grid, mode)?;
    let rep = iterate_lifts(&o, &m, iterations)?;
    let radius = spectrum_of(&build_a(&o)?.matrix)?.spectral_radius;
    for (k, d) in rep.distances.iter().enumerate() {
        r.records.push(json!({"k": k, "distance": d}));
    }
    r.plot = vec![rep
        .distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect()];
    r.note("rate", rep.rate);
    r.note("spectral_radius", radius);
    r.note("max_residual", rep.max_residual);
    Ok(r)
}

pub fn sectors(
    fam: &FamilyArgs,
    params: &[f64],
    word: Option<&str>,
    theta: f64,
    g: &GridArgs,
    lifts: Option<usize>,
) -> Result<Report> {
    let mut r = Report::new("sectors");
    let family = family_of(fam, &mut r)?;
    if family.param_dim() != 1 {
        bail!("sector checks need a one-parameter family");
    }
    let tol = orbit_tol(&family, None, &mut r);
    let c = match (params, word) {
        ([c], None) => *c,
        ([], Some(w)) => {
            let word = KneadingSequence::parse(w)?;
            r.knob("word", word.to_string());
            let b = bracket(&family, None, None, &mut r)?;
            solve_word(&family, &word, b, DEFAULT_DELTA_HIT)?
        }
        _ => bail!("give one --param or a --word"),
    };
    r.knob("param", c);
    let o = marked_orbit(&family, &[c], tol)?;
    let ell = match fam.ell {
        Some(l) => l,
        None => family
            .critical_data(&[c])?
            .iter()
            .flat_map(|cp| cp.order)
            .fold(f64::INFINITY, f64::min),
    };
    let full = SectorParams::new(theta, ell)?;
    let half = SectorParams::new(theta / 2.0, ell)?;
    r.knob("theta", theta);
    r.knob("ell", ell);
    let (grid, sigma, mode) = grid_of(g, 1e-3, &mut r)?;
    let q = lifts.unwrap_or(o.orbits[0].q);
    r.knob("lifts", q);
    let mut h = make_orbit_motion(&o, sigma, g.seed, &grid, mode)?;
    let mut all = true;
    for i in 0..=q {
        if i > 0 {
            h = lift_motion(&o, &h)?.grid;
        }
        let rep = theta_regular_check(&h, &full);
        all &= rep.regular;
        r.records.push(json!({
            "lift": i,
            "regular": rep.regular,
            "a1_margin": rep.a1_margin,
            "a2_margin": rep.a2_margin,
            "offender": rep.offender,
        }));
    }
    let last = theta_regular_check(&h, &half);
    r.note("half_regular", last.regular);
    r.note("half_a1_margin", last.a1_margin);
    r.note("half_a2_margin", last.a2_margin);
    r.verdict = Some(all && last.regular);
    Ok(r)
}

pub fn pl(epsilon: i8, kappa: Vec<f64>, values: Vec<f64>) -> Result<Report> {
    let mut r = Report::new("pl");
    r.knob("epsilon", epsilon);
    r.knob("kappa", json!(kappa));
    r.knob("values", json!(values));
    let spec = pl_from_values(epsilon, kappa, values)?;
    let rep = pl_markov_matrix(&spec)?;
    let ergodic = pl_ergodic(&spec)?;
    let part = &rep.partition;
    for i in 0..part.len() {
        r.records.push(json!({
            "index": i,
            "left": part.cuts[i],
            "right": part.cuts[i + 1],
            "width": rep.widths[i],
            "branch": part.branch[i],
            "covers": part.covers[i].iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" "),
        }));
    }
    r.plot = vec![(0..=200)
        .map(|k| {
            let x = -1.0 + 2.0 * k as f64 / 200.0;
            (x, spec.eval(x))
        })
        .collect()];
    r.note("s", spec.s);
    r.note("entropy", spec.s.ln());
    r.note("turning", json!(spec.turning));
    r.note("slopes", json!(spec.slopes));
    r.note("ergodic", ergodic);
    r.note("det", rep.det);
    r.note("width_residual", rep.residual);
    r.verdict = Some(rep.det.abs() <= 1e-9 && rep.residual <= 1e-9);
    Ok(r)
}

fn parse_relation(s: &str) -> Result<CriticalRelation> {
    let parts: Vec<usize> = s
        .split(':')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("relation '{s}' must look like from:q:to"))?;
    match parts[..] {
        [from, q, to] => Ok(CriticalRelation { from, q, to }),
        _ => bail!("relation '{s}' must look like from:q:to"),
    }
}

pub fn lorenz(fam: &FamilyArgs, params: &[f64], relations: &[String], tol: Option<f64>) -> Result<Report> {
    let mut r = Report::new("lorenz");
    let fam = if fam.family.is_none() && fam.family_json.is_none() {
        FamilyArgs { family: Some("lorenz".into()), ..fam.clone() }
    } else {
        fam.clone()
    };
    let family = family_of(&fam, &mut r)?;
    if !family.is_lorenz() {
        bail!("{} is not a Lorenz family", family.name());
    }
    let tol = orbit_tol(&family, tol, &mut r);
    let [p0, p1] = params else {
        bail!("--param needs two values");
    };
    r.knob("param", json!(params));
    let mut p = [*p0, *p1];
    if !relations.is_empty() {
        let rels: Vec<CriticalRelation> = relations.iter().map(|s| parse_relation(s)).collect::<Result<_>>()?;
        let rels: [CriticalRelation; 2] = rels
            .try_into()
            .map_err(|_| anyhow!("--relations needs exactly two entries"))?;
        r.knob("relations", json!(relations));
        let sol = solve_2d(&family, &rels, p)?;
        r.note("newton_iterations", sol.iterations);
        r.note("newton_residual", sol.residual);
        p = sol.params;
    }
    let o = marked_orbit(&family, &p, tol)?;
    let def = o.deformation()?;
    let w0: Vec<f64> = def.base_point().iter().map(|z| z.re).collect();
    let rr = lorenz_r(&o, [w0[0], w0[1]])?;
    let s = spectrum_of(&build_a(&o)?.matrix)?;
    r.records.push(json!({
        "param": p,
        "periods": periods(&o),
        "quotient": rr.quotient,
        "positive": rr.positive,
        "jacobian": rr.jacobian,
        "spectral_radius": s.spectral_radius,
        "dist_to_one": s.dist_to_one,
        "one_is_eigenvalue": s.one_is_eigenvalue(),
    }));
    r.verdict = Some(rr.positive && !s.one_is_eigenvalue());
    Ok(r)
}

fn parse_range(s: &str) -> Result<(u32, u32)> {
    let bad = || anyhow!("'{s}' must be an odd integer or a range like 3..31");
    match s.split_once("..") {
        Some((a, b)) => Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

pub fn constants(odd_ell: &str) -> Result<Report> {
    let mut r = Report::new("constants");
    let (lo, hi) = parse_range(odd_ell)?;
    r.knob("odd_ell", odd_ell);
    let mut ok = true;
    let mut block = Vec::new();
    for ell in (lo..=hi).filter(|l| l % 2 == 1) {
        let k = odd_constants(ell)?;
        ok &= k.margin > 0.0 && k.residual <= 1e-13;
        block.push((ell as f64, k.margin));
        r.records.push(json!({
            "ell": ell,
            "theta": k.theta,
            "r": k.r,
            "residual": k.residual,
            "lhs": k.lhs,
            "rhs": k.rhs,
            "margin": k.margin,
        }));
    }
    r.plot = vec![block];
    r.verdict = Some(ok);
    Ok(r)
}

pub fn separation(fam: &FamilyArgs, params: &[f64]) -> Result<Report> {
    let mut r = Report::new("separation");
    let family = family_of(fam, &mut r)?;
    r.knob("param", json!(params));
    match separation_check(&family, params) {
        Ok(rep) => {
            let g = rep.geometry;
            r.records.push(json!({
                "holds": rep.holds,
                "description": rep.description,
                "beta": g.map(|g| g.beta),
                "x0": g.map(|g| g.x0),
                "x1": g.map(|g| g.x1),
                "r": g.map(|g| g.r),
                "diam_u": g.map(|g| g.diam_u),
                "expansion": g.map(|g| g.expansion),
            }));
            r.verdict = Some(rep.holds);
        }
        Err(Error::GeometryFailed(msg)) => {
            r.records.push(json!({"holds": false, "description": msg}));
            r.verdict = Some(false);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(r)
}
