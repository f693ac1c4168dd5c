use std::path::PathBuf;

use pathheat::drift::{drift_limit_study, SmoothPath};
use pathheat::dynamics::{brownian_path_sample, flat_she_exact, run_until, BasisKind, FlatSpectralState, SheSettings, SheState, Variant};
use pathheat::functionals::{ibp_check, qv_check, CylinderFunction, DirectionField};
use pathheat::geometry::{Manifold, ManifoldKind};
use pathheat::inequalities::{constant_report, gradient_ineq_check, lsi_empirical, PointFunction};
use pathheat::measures::{convergence_study, heat_kernel_expectation, nu_sample, nu_total_mass, ChainConfig};
use pathheat::pathgrid::{fmt17, write_path_csv, Partition};
use pathheat::stats::stream;
use pathheat::verify::{self, Profile};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{config_err, parse_direction, parse_grid, parse_list, parse_manifold, DeltaSetting, RunConfig};
use crate::report::Output;
use crate::{Command, Common};

/// Resolved settings shared by every subcommand.
struct Ctx {
    cfg: RunConfig,
    seed: u64,
    threads: usize,
    out: PathBuf,
}

fn resolve(common: &Common) -> anyhow::Result<Ctx> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(m) = &common.manifold {
        cfg.manifold = Some(parse_manifold(m)?);
    }
    if let Some(n) = common.n {
        cfg.n = Some(n);
    }
    if let Some(d) = &common.delta {
        cfg.delta = Some(match d.parse::<f64>() {
            Ok(v) => DeltaSetting::Value(v),
            Err(_) => DeltaSetting::Named(d.clone()),
        });
    }
    let env_seed = match std::env::var("PATHHEAT_SEED") {
        Ok(s) => Some(s.parse::<u64>().map_err(|_| config_err(format!("PATHHEAT_SEED: not an integer: '{s}'")))?),
        Err(_) => None,
    };
    let seed = common.seed.or(cfg.seed).or(env_seed).unwrap_or(0);
    cfg.seed = Some(seed);
    let threads = common
        .threads
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(config_err("threads: must be at least 1"));
    }
    cfg.threads = Some(threads);
    let out = common.out.clone().or(cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(out.display().to_string());
    Ok(Ctx { cfg, seed, threads, out })
}

pub fn run(common: &Common, command: &Command) -> anyhow::Result<bool> {
    let ctx = resolve(common)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.threads).build()?;
    pool.install(|| dispatch(&ctx, command))
}

fn dispatch(ctx: &Ctx, command: &Command) -> anyhow::Result<bool> {
    let mut out = Output::new(&ctx.out)?;
    let (name, results, checks) = match command {
        Command::GeomCheck { samples } => ("geom-check", geom_check(ctx, *samples)?, None),
        Command::Simulate { variant, modes, t_end, dt, chains, stats } => {
            ("simulate", simulate(ctx, &mut out, variant.as_deref(), *modes, *t_end, *dt, *chains, stats)?, None)
        }
        Command::SampleNu { samples, burn_in, chains } => ("sample-nu", sample_nu(ctx, &mut out, *samples, *burn_in, *chains)?, None),
        Command::Mass { ns, samples } => ("mass", mass(ctx, &mut out, ns, *samples)?, None),
        Command::Convergence { ns, samples, axis } => ("convergence", convergence(ctx, &mut out, ns, *samples, *axis)?, None),
        Command::Ibp { functional, direction, samples, steps } => {
            ("ibp", ibp(ctx, functional.as_deref(), direction.as_deref(), *samples, *steps)?, None)
        }
        Command::Qv { t_end, dt, trajectories, index, axis } => ("qv", qv(ctx, *t_end, *dt, *trajectories, *index, *axis)?, None),
        Command::DriftLimit { path, ns } => ("drift-limit", drift_limit(ctx, &mut out, path, ns)?, None),
        Command::Constants { k_grid, d, horizon, intervals, truncation } => {
            ("constants", constants(&mut out, k_grid, *d, *horizon, *intervals, *truncation)?, None)
        }
        Command::Lsi { functional, samples } => ("lsi", lsi(ctx, functional.as_deref(), *samples)?, None),
        Command::GradIneq { t1, t2, axis } => ("grad-ineq", grad_ineq(ctx, *t1, *t2, *axis)?, None),
        Command::Verify { profile } => {
            let (results, checks) = verify_cmd(ctx, profile)?;
            ("verify", results, Some(checks))
        }
    };
    let checks = checks.unwrap_or_else(|| derive_checks(&results));
    let config = serde_json::to_value(&ctx.cfg)?;
    let passed = out.finish(name, ctx.seed, &config, &results, &checks)?;
    for (label, ok) in checks.iter().filter(|_| name != "verify") {
        println!("[{}] {label}", if *ok { "PASS" } else { "FAIL" });
    }
    println!("report written to {}", ctx.out.join("report.json").display());
    Ok(passed)
}

/// Collects boolean `pass` fields of a results payload as named checks.
fn derive_checks(results: &Value) -> Vec<(String, bool)> {
    match results.get("checks") {
        Some(Value::Object(map)) => map.iter().map(|(k, v)| (k.clone(), v.as_bool().unwrap_or(false))).collect(),
        _ => Vec::new(),
    }
}

fn geom_check(ctx: &Ctx, samples: usize) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let mut rng = stream(ctx.seed, 0);
    let mut exp_log: f64 = 0.0;
    let mut transport: f64 = 0.0;
    let mut frames: f64 = 0.0;
    for _ in 0..samples {
        let p = m.random_point(&mut rng);
        let mut v = m.random_tangent(&p, 0.3 * m.inj_radius.min(3.0), &mut rng);
        let cap = 0.9 * m.inj_radius.min(10.0);
        let len = m.norm(&v);
        if len > cap {
            v *= cap / len;
        }
        let q = m.exp(&p, &v);
        if let Ok(w) = m.log(&p, &q) {
            exp_log = exp_log.max(m.norm(&(&w - &v)));
        }
        let u = m.reference_frame(&p);
        let tu = m.transport_frame(&u, &q)?;
        frames = frames.max(m.frame_orthonormality_error(&tu));
        let z = m.random_tangent(&p, 1.0, &mut rng);
        let tz = m.transport(&p, &q, &z)?;
        transport = transport.max((m.norm(&tz) - m.norm(&z)).abs());
    }
    let o = m.origin();
    let mass = match (m.kind, m.dim) {
        (ManifoldKind::Sphere, 2) | (ManifoldKind::Torus, 1) => Some(heat_kernel_expectation(&m, &o, 0.5, |_| 1.0, 64)?),
        _ => None,
    };
    let mass_ok = mass.map(|x| (x - 1.0).abs() < 1e-8).unwrap_or(true);
    Ok(json!({
        "manifold": m.spec, "samples": samples,
        "exp_log_roundtrip": exp_log, "transport_isometry": transport, "frame_orthonormality": frames,
        "heat_kernel_mass": mass,
        "checks": { "exp_log_roundtrip": exp_log < 1e-9, "transport_isometry": transport < 1e-10,
                    "frame_orthonormality": frames < 1e-10, "heat_kernel_mass": mass_ok }
    }))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    ctx: &Ctx,
    out: &mut Output,
    variant: Option<&str>,
    modes: Option<usize>,
    t_end: Option<f64>,
    dt: Option<f64>,
    chains: Option<usize>,
    stats: &str,
) -> anyhow::Result<Value> {
    let dynamics = &ctx.cfg.dynamics;
    let variant: Variant = match variant {
        Some(v) => serde_json::from_value(json!(v)).map_err(|_| config_err(format!("variant: unknown '{v}'")))?,
        None => dynamics.variant.unwrap_or(Variant::FlatDn),
    };
    let t_end = t_end.or(dynamics.t_end).unwrap_or(10.0);
    let n = ctx.cfg.n.unwrap_or(32);
    match variant {
        Variant::FlatDn | Variant::FlatDd => {
            if stats != "covariance" {
                return Err(config_err(format!("stats: spectral variants report 'covariance', got '{stats}'")));
            }
            let kind = if variant == Variant::FlatDn { BasisKind::DirichletNeumann } else { BasisKind::DirichletDirichlet };
            let modes = modes.or(dynamics.modes).unwrap_or(256);
            let chains = chains.or(dynamics.chains).unwrap_or(2000);
            let dt = dt.or(dynamics.dt).unwrap_or(1.0);
            let times: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
            let samples: Vec<Vec<f64>> = (0..chains)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream(ctx.seed, c as u64);
                    let mut st = FlatSpectralState::zero(kind, modes, 1);
                    let mut t = 0.0;
                    while t < t_end - 1e-12 {
                        let h = dt.min(t_end - t);
                        flat_she_exact(&mut st, h, &mut rng);
                        t += h;
                    }
                    times.iter().map(|s| st.field(*s)[0]).collect()
                })
                .collect();
            let target = |s: f64, t: f64| match kind {
                BasisKind::DirichletNeumann => s.min(t),
                BasisKind::DirichletDirichlet => s.min(t) * (1.0 - s.max(t)),
            };
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            let nf = chains as f64;
            let means: Vec<f64> = (0..n).map(|i| samples.iter().map(|x| x[i]).sum::<f64>() / nf).collect();
            for i in 0..n {
                for j in i..n {
                    let cov = samples.iter().map(|x| (x[i] - means[i]) * (x[j] - means[j])).sum::<f64>() / (nf - 1.0);
                    let tg = target(times[i], times[j]);
                    worst = worst.max((cov - tg).abs());
                    rows.push(vec![fmt17(times[i]), fmt17(times[j]), fmt17(cov), fmt17(tg)]);
                }
            }
            out.csv("covariance.csv", &["s", "t", "covariance", "target"], &rows)?;
            Ok(json!({ "variant": variant, "modes": modes, "chains": chains, "t_end": t_end, "dt": dt, "n": n,
                       "max_abs_deviation": worst }))
        }
        Variant::Full | Variant::Sigma => {
            let m = ctx.cfg.manifold()?;
            let delta = ctx.cfg.resolve_delta(&m, variant == Variant::Full)?;
            let part = Partition::new(n)?;
            let mut rng = stream(ctx.seed, 0);
            let (path, _) = brownian_path_sample(&m, &m.origin(), part, delta, 4, &mut rng)?;
            let mut settings = SheSettings::with_default_dt(variant, part.eps);
            if let Some(h) = dt.or(dynamics.dt) {
                settings.dt = h;
            }
            let mut state = SheState::new(&m, path, &m.reference_frame(&m.origin()), settings.clone(), rng)?;
            let mut halvings = 0usize;
            let mut energy_trace = Vec::new();
            let steps = run_until(&m, &mut state, t_end, |s, rec, _| {
                halvings += rec.halvings;
                energy_trace.push(vec![fmt17(s.t), fmt17(pathheat::pathgrid::energy(&m, &s.path))]);
            })?;
            out.csv("energy.csv", &["t", "energy"], &energy_trace)?;
            let seed = ctx.seed;
            let final_path = state.path.clone();
            out.write("final_path.csv", |w| write_path_csv(&mut &mut *w, &m, &final_path, Some(seed), None))?;
            Ok(json!({ "variant": variant, "manifold": m.spec, "n": n, "delta": delta, "dt": settings.dt,
                       "t_end": t_end, "steps": steps, "halvings": halvings }))
        }
    }
}

fn sample_nu(ctx: &Ctx, out: &mut Output, samples: Option<usize>, burn_in: Option<usize>, chains: Option<usize>) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let n = ctx.cfg.n.unwrap_or(32);
    let delta = ctx.cfg.resolve_delta(&m, true)?;
    let s = &ctx.cfg.sampler;
    let mut config = ChainConfig::default();
    config.samples = samples.or(s.samples).unwrap_or(config.samples);
    config.burn_in = burn_in.or(s.burn_in).unwrap_or(config.burn_in);
    config.chains = chains.or(s.chains).unwrap_or(config.chains);
    config.thin = s.thin.unwrap_or(config.thin);
    let ens = nu_sample(&m, &m.origin(), n, delta, &config, ctx.seed, |p| pathheat::pathgrid::energy(&m, p))?;
    let seed = ctx.seed;
    out.write("ensemble.csv", |w| {
        for p in &ens.paths {
            write_path_csv(&mut &mut *w, &m, p, Some(seed), Some(1.0))?;
        }
        Ok(())
    })?;
    Ok(json!({ "manifold": m.spec, "n": n, "delta": delta, "config": config, "provenance": ens.provenance,
               "paths": ens.paths.len() }))
}

fn mass(ctx: &Ctx, out: &mut Output, ns: &str, samples: Option<usize>) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let ns = parse_list(ns)?;
    let delta = match &ctx.cfg.delta {
        None => 0.9 * m.inj_radius.min(f64::MAX),
        Some(_) => ctx.cfg.resolve_delta(&m, false)?,
    };
    let delta = if delta.is_finite() { delta } else { f64::INFINITY };
    let samples = samples.or(ctx.cfg.sampler.samples).unwrap_or(200_000);
    let mut rows = Vec::new();
    let mut ests = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let e = nu_total_mass(&m, &m.origin(), n, delta, samples, ctx.seed.wrapping_add(k as u64))?;
        rows.push(vec![n.to_string(), fmt17(e.value), fmt17(e.stderr), fmt17(e.truncated_fraction)]);
        ests.push(e);
    }
    out.csv("mass.csv", &["n", "mass", "stderr", "truncated_fraction"], &rows)?;
    let extrapolated = if ns.len() >= 2 {
        let values: Vec<f64> = ests.iter().map(|e| e.value).collect();
        Some(pathheat::measures::richardson(&ns, &values).0)
    } else {
        None
    };
    let limit = (-m.scalar_curvature(&m.origin()) / 6.0).exp();
    Ok(json!({ "estimates": ests, "richardson": extrapolated, "limit": limit }))
}

fn convergence(ctx: &Ctx, out: &mut Output, ns: &str, samples: Option<usize>, axis: Option<usize>) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    if !matches!((m.kind, m.dim), (ManifoldKind::Sphere, 2) | (ManifoldKind::Torus, 1)) {
        return Err(config_err("manifold: convergence needs a 2-sphere or a circle for the heat-kernel reference"));
    }
    let ns = parse_list(ns)?;
    let axis = axis.unwrap_or(m.ambient_dim() - 1);
    if axis >= m.ambient_dim() {
        return Err(config_err(format!("axis: {axis} beyond the ambient dimension")));
    }
    let o = m.origin();
    let delta = 0.9 * m.inj_radius;
    let samples = samples.or(ctx.cfg.sampler.samples).unwrap_or(400_000);
    let weight = (-m.scalar_curvature(&o) / 6.0).exp();
    let reference = weight * heat_kernel_expectation(&m, &o, 1.0, |y| y[axis], 64)?;
    let table = convergence_study(&m, &o, |p| p.point(p.n())[axis], &ns, delta, samples, ctx.seed, reference)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt17(r.estimate), fmt17(r.stderr), fmt17(r.reference), fmt17(r.gap)])
        .collect();
    out.csv("convergence.csv", &["n", "estimate", "stderr", "reference", "gap"], &rows)?;
    Ok(json!({ "functional": format!("endpoint coordinate {axis}"), "rows": table.rows }))
}

fn ibp(ctx: &Ctx, functional: Option<&str>, direction: Option<&str>, samples: Option<usize>, steps: Option<usize>) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let fname = functional
        .map(str::to_string)
        .or_else(|| ctx.cfg.functionals.as_ref().and_then(|v| v.first().cloned()))
        .unwrap_or_else(|| "time_integral(0)".into());
    let f = CylinderFunction::parse(&fname).map_err(|e| config_err(format!("functionals: {e}")))?;
    let h = match direction.map(str::to_string).or(ctx.cfg.direction.clone()) {
        Some(d) => parse_direction(&d)?,
        None => {
            let mut v = vec![0.0; m.dim];
            v[0] = 1.0;
            DirectionField::Linear { v }
        }
    };
    let samples = samples.or(ctx.cfg.sampler.samples).unwrap_or(100_000);
    let steps = steps.or(ctx.cfg.sampler.steps).unwrap_or(64);
    let r = ibp_check(&m, &f, &h, samples, steps, ctx.seed)?;
    Ok(json!({ "functional": fname, "direction": h, "report": r, "checks": { "abs_z_at_most_3": r.z.abs() <= 3.0 } }))
}

fn qv(ctx: &Ctx, t_end: Option<f64>, dt: Option<f64>, trajectories: Option<usize>, index: Option<usize>, axis: usize) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let n = ctx.cfg.n.unwrap_or(32);
    let delta = ctx.cfg.resolve_delta(&m, true)?;
    let part = Partition::new(n)?;
    let t_end = t_end.or(ctx.cfg.dynamics.t_end).unwrap_or(0.02);
    let dt = dt.or(ctx.cfg.dynamics.dt).unwrap_or(0.005 * part.eps * part.eps);
    let trajectories = trajectories.unwrap_or(4);
    let index = index.unwrap_or(n / 2).max(1);
    let states = (0..trajectories)
        .map(|k| {
            let mut rng = stream(ctx.seed, k as u64);
            let (path, _) = brownian_path_sample(&m, &m.origin(), part, delta, 4, &mut rng)?;
            let mut settings = SheSettings::with_default_dt(Variant::Full, part.eps);
            settings.dt = dt;
            SheState::new(&m, path, &m.reference_frame(&m.origin()), settings, rng)
        })
        .collect::<pathheat::Result<Vec<_>>>()?;
    let r = qv_check(&m, states, index, axis, t_end)?;
    Ok(json!({ "manifold": m.spec, "n": n, "delta": delta, "dt": dt, "index": index, "axis": axis, "report": r,
               "checks": { "ratio_within_5_percent": (0.95..=1.05).contains(&r.ratio) } }))
}

fn drift_limit(ctx: &Ctx, out: &mut Output, path: &str, ns: &str) -> anyhow::Result<Value> {
    let ns = parse_list(ns)?;
    let (m, smooth) = match path {
        "great_circle" => (ctx.cfg.manifold()?, SmoothPath::GreatCircle { speed: 1.0 }),
        "latitude" => (ctx.cfg.manifold()?, SmoothPath::Latitude { polar: 1.0, speed: 1.0 }),
        "line" => {
            let m = Manifold::from_spec(&ctx.cfg.manifold.clone().unwrap_or(pathheat::geometry::ManifoldSpec::Euclidean { dim: 2 }))?;
            let mut v = vec![0.0; m.dim];
            v[0] = 1.0;
            (m, SmoothPath::Line { direction: v })
        }
        "flat_sine" => {
            let m = Manifold::from_spec(&ctx.cfg.manifold.clone().unwrap_or(pathheat::geometry::ManifoldSpec::Euclidean { dim: 2 }))?;
            (m, SmoothPath::FlatSine { axis: 0, amplitude: 0.3 })
        }
        other => return Err(config_err(format!("path: unknown smooth path '{other}'"))),
    };
    let study = drift_limit_study(&m, &smooth, &ns)?;
    let rows: Vec<Vec<String>> = study.rows.iter().map(|r| vec![r.n.to_string(), fmt17(r.eps), fmt17(r.sup_error)]).collect();
    out.csv("drift_limit.csv", &["n", "eps", "sup_error"], &rows)?;
    Ok(json!({ "manifold": m.spec, "path": smooth, "study": study }))
}

fn constants(out: &mut Output, k_grid: &str, d: usize, horizon: f64, intervals: usize, truncation: usize) -> anyhow::Result<Value> {
    let ks = parse_grid(k_grid)?;
    let reports = ks
        .iter()
        .map(|&k| constant_report(k, d, horizon, intervals, truncation))
        .collect::<pathheat::Result<Vec<_>>>()?;
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_else(|| "nan".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![fmt17(r.k), fmt17(r.c), fmt17(r.c0), opt(r.c_tilde), fmt17(r.c_einstein), fmt17(r.c1), fmt17(r.c2n)])
        .collect();
    out.csv("constants.csv", &["K", "C", "C0", "Ctilde", "C_einstein", "C1", "C2n"], &rows)?;
    let text = serde_json::to_string_pretty(&reports)?;
    out.write("constants.json", |w| writeln!(w, "{text}"))?;
    Ok(json!({ "reports": reports }))
}

fn lsi(ctx: &Ctx, functional: Option<&str>, samples: Option<usize>) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    let f = match functional.map(str::to_string).or_else(|| ctx.cfg.functionals.as_ref().and_then(|v| v.first().cloned())) {
        Some(name) => CylinderFunction::parse(&name).map_err(|e| config_err(format!("functionals: {e}")))?,
        None => CylinderFunction::new(
            pathheat::functionals::Outer::Affine { a: 1.0, b: 0.2 },
            vec![pathheat::functionals::Inner::TimeIntegral { axis: 0 }],
        )?,
    };
    let n = ctx.cfg.n.unwrap_or(16);
    let samples = samples.or(ctx.cfg.sampler.samples).unwrap_or(100_000);
    let r = lsi_empirical(&m, &f, n, 4, samples, ctx.seed)?;
    Ok(json!({ "functional": f, "n": n, "report": r }))
}

fn grad_ineq(ctx: &Ctx, t1: f64, t2: f64, axis: usize) -> anyhow::Result<Value> {
    let m = ctx.cfg.manifold()?;
    if axis >= m.ambient_dim() {
        return Err(config_err(format!("axis: {axis} beyond the ambient dimension")));
    }
    let f = PointFunction::Coord { axis };
    let y = m.origin();
    let r = gradient_ineq_check(&m, &f, t1, t2, &y)?;
    Ok(json!({ "manifold": m.spec, "f": f, "t1": t1, "t2": t2, "report": r,
               "checks": { "margin_within_quadrature_error": r.margin >= -3.0 * r.quadrature_error } }))
}

fn verify_cmd(ctx: &Ctx, profile: &str) -> anyhow::Result<(Value, Vec<(String, bool)>)> {
    let profile: Profile = profile.parse().map_err(|e: pathheat::Error| config_err(format!("profile: {e}")))?;
    let report = verify::run(profile, ctx.seed, ctx.threads)?;
    for line in report.lines() {
        println!("{line}");
    }
    let checks = report.criteria.iter().map(|c| (format!("criterion {} {}", c.id, c.name), c.passed)).collect();
    Ok((serde_json::to_value(&report)?, checks))
}
