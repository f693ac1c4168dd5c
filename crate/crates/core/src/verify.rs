//! The acceptance suite: one pass/fail line per criterion.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;

use crate::drift::{drift_field_full, drift_limit_study, SmoothPath};
use crate::dynamics::{brownian_path_sample, flat_she_exact, BasisKind, FlatSpectralState, SheSettings, SheState, Variant};
use crate::error::{Error, Result};
use crate::functionals::{energy_summands, ibp_check, l2_gradient, qv_check, CylinderFunction, DirectionField, Inner, Outer};
use crate::geometry::{Manifold, Point};
use crate::inequalities::{
    einstein_lsi_constant, flow_bound, gourcy_wu_constant, gradient_ineq_check, lsi_constant, lsi_constant_direct,
    lsi_constant_taylor, ricci_flow_matrix, ricci_samples, PointFunction,
};
use crate::jacobi::{default_delta, jacobi_basis, remainder_expansion, sup_bound};
use crate::measures::{convergence_study, heat_kernel_expectation, nu_total_mass, richardson};
use crate::pathgrid::{anti_development, develop, horizontal_lift, Partition};
use crate::stats::{ls_slope, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Full budgets at the stated tolerances.
    Desk,
    /// Reduced budgets for smoke runs; same tolerances.
    Quick,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "quick" => Ok(Profile::Quick),
            _ => Err(Error::Config(format!("unknown profile '{s}' (expected desk or quick)"))),
        }
    }
}

struct Budget {
    she_chains: usize,
    ibp_samples: usize,
    mass_samples: usize,
    conv_samples: usize,
    qv_trajectories: usize,
    sup_paths: usize,
    flow_paths: usize,
}

impl Profile {
    fn budget(&self) -> Budget {
        match self {
            Profile::Desk => Budget {
                she_chains: 100_000,
                ibp_samples: 100_000,
                mass_samples: 200_000,
                conv_samples: 400_000,
                qv_trajectories: 4,
                sup_paths: 1000,
                flow_paths: 1000,
            },
            Profile::Quick => Budget {
                she_chains: 5_000,
                ibp_samples: 5_000,
                mass_samples: 20_000,
                conv_samples: 20_000,
                qv_trajectories: 1,
                sup_paths: 50,
                flow_paths: 50,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub profile: Profile,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    /// One line per criterion.
    pub fn lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| format!("[{}] criterion {:>2} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.summary))
            .collect()
    }
}

fn crit(id: usize, name: &str, passed: bool, summary: String, details: Value) -> Criterion {
    Criterion { id, name: name.into(), passed, summary, details }
}

fn failed(id: usize, name: &str, e: Error) -> Criterion {
    crit(id, name, false, format!("error: {e}"), json!({ "error": e.to_string() }))
}

/// Runs criteria 1-10 on a dedicated pool of `threads` workers. Criterion 11
/// (determinism across worker counts) compares two such reports, see `determinism`.
pub fn run(profile: Profile, seed: u64, threads: usize) -> Result<VerifyReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let b = profile.budget();
        let named: Vec<(usize, &str, fn(&Budget, u64) -> Result<Criterion>)> = vec![
            (1, "flat path-space SHE covariance", c1_flat_path),
            (2, "flat loop-space SHE covariance", c2_flat_loop),
            (3, "integration by parts", c3_ibp),
            (4, "approximation measure convergence", c4_convergence),
            (5, "Jacobi field remainder and sup bound", c5_jacobi),
            (6, "continuum drift limit", c6_drift),
            (7, "functional-inequality constants", c7_constants),
            (8, "quadratic variation", c8_qv),
            (9, "gradient inequality", c9_gradient),
            (10, "frame-gauge invariance", c10_gauge),
        ];
        let criteria = named
            .into_iter()
            .map(|(id, name, f)| f(&b, seed.wrapping_add(1000 * id as u64)).unwrap_or_else(|e| failed(id, name, e)))
            .collect();
        Ok(VerifyReport { profile, seed, criteria })
    })
}

/// Criterion 11 from two runs that used different worker counts.
pub fn determinism(a: &VerifyReport, b: &VerifyReport, threads: (usize, usize)) -> Criterion {
    let ja = serde_json::to_string(&a.criteria).unwrap_or_default();
    let jb = serde_json::to_string(&b.criteria).unwrap_or_default();
    let same = ja == jb;
    crit(
        11,
        "determinism across worker counts",
        same,
        format!("payloads at {} and {} threads {}", threads.0, threads.1, if same { "identical" } else { "differ" }),
        json!({ "threads": [threads.0, threads.1], "identical": same, "bytes": ja.len() }),
    )
}

fn flat_covariance(kind: BasisKind, chains: usize, seed: u64, target: impl Fn(f64, f64) -> f64) -> (bool, Value, String) {
    let modes = 256;
    let grid = 32;
    let (t_end, dt) = (10.0, 1.0);
    let times: Vec<f64> = (1..=grid).map(|i| i as f64 / grid as f64).collect();
    let phi = DMatrix::from_fn(grid, modes, |i, k| kind.basis(k, times[i]));
    let samples: Vec<DVector<f64>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let mut st = FlatSpectralState::zero(kind, modes, 1);
            let mut t = 0.0;
            while t < t_end - 1e-12 {
                flat_she_exact(&mut st, dt, &mut rng);
                t += dt;
            }
            &phi * st.modes.column(0)
        })
        .collect();
    let nf = chains as f64;
    let mean: DVector<f64> = samples.iter().fold(DVector::zeros(grid), |acc, x| acc + x) / nf;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_dev: f64 = 0.0;
    let mut worst_pair = (0.0, 0.0);
    for i in 0..grid {
        for j in i..grid {
            let prods: Vec<f64> = samples.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).collect();
            let cov = prods.iter().sum::<f64>() / (nf - 1.0);
            let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt();
            let dev = (cov - target(times[i], times[j])).abs();
            let tol = (3.0 * se).max(0.02);
            if dev - tol > worst_excess {
                worst_excess = dev - tol;
                worst_pair = (times[i], times[j]);
            }
            worst_dev = worst_dev.max(dev);
        }
    }
    let pass = worst_excess <= 0.0;
    let summary = format!("max |cov - target| = {worst_dev:.4} over {} pairs, {chains} chains", grid * (grid + 1) / 2);
    (
        pass,
        json!({ "modes": modes, "grid": grid, "chains": chains, "t_end": t_end, "dt": dt,
                "max_abs_dev": worst_dev, "worst_excess_over_tolerance": worst_excess, "worst_pair": [worst_pair.0, worst_pair.1] }),
        summary,
    )
}

fn c1_flat_path(b: &Budget, seed: u64) -> Result<Criterion> {
    let (pass, details, summary) = flat_covariance(BasisKind::DirichletNeumann, b.she_chains, seed, f64::min);
    Ok(crit(1, "flat path-space SHE covariance", pass, summary, details))
}

fn c2_flat_loop(b: &Budget, seed: u64) -> Result<Criterion> {
    let (pass, details, summary) =
        flat_covariance(BasisKind::DirichletDirichlet, b.she_chains, seed, |s, t| s.min(t) * (1.0 - s.max(t)));
    Ok(crit(2, "flat loop-space SHE covariance", pass, summary, details))
}

fn time_integral_variance(steps: usize) -> f64 {
    let w = Partition::new(steps).expect("steps > 0").trapezoid_weights();
    let t = |i: usize| i as f64 / steps as f64;
    let mut v = 0.0;
    for i in 0..=steps {
        for j in 0..=steps {
            v += w[i] * w[j] * t(i).min(t(j));
        }
    }
    v
}

fn c3_ibp(b: &Budget, seed: u64) -> Result<Criterion> {
    let steps = 64;
    let s2 = Manifold::sphere(2, 1.0);
    let pairs = [
        (
            "time_integral(0), h = s e1",
            CylinderFunction::parse("time_integral(0)")?,
            DirectionField::Linear { v: vec![1.0, 0.0] },
        ),
        (
            "sin(time_integral(1)), h = sin(pi s / 2) e2",
            CylinderFunction::parse("sin(time_integral(1))")?,
            DirectionField::Sine { v: vec![0.0, 1.0], freq: 1.0 },
        ),
        (
            "squared_integral(0), h = s (0.6, 0.8)",
            CylinderFunction::parse("squared_integral(0)")?,
            DirectionField::Linear { v: vec![0.6, 0.8] },
        ),
    ];
    let mut pass = true;
    let mut rows = Vec::new();
    let mut zs = Vec::new();
    for (k, (label, f, h)) in pairs.iter().enumerate() {
        let r = ibp_check(&s2, f, h, b.ibp_samples, steps, seed + k as u64)?;
        pass &= r.z.abs() <= 3.0;
        zs.push(r.z);
        rows.push(json!({ "case": label, "report": r }));
    }
    let e1 = Manifold::euclidean(1);
    let f = CylinderFunction::parse("sin(time_integral(0))")?;
    let h = DirectionField::Linear { v: vec![1.0] };
    let r = ibp_check(&e1, &f, &h, b.ibp_samples, steps, seed + 10)?;
    // D_h F = cos(I) / 2 exactly on the grid, and I is centred Gaussian.
    let closed = 0.5 * (-time_integral_variance(steps) / 2.0).exp();
    let z_l = (r.lhs - closed) / r.stderr_lhs;
    let z_r = (r.rhs - closed) / r.stderr_rhs;
    let flat_ok = r.z.abs() <= 3.0 && z_l.abs() <= 3.0 && z_r.abs() <= 3.0;
    pass &= flat_ok;
    Ok(crit(
        3,
        "integration by parts",
        pass,
        format!(
            "sphere z = [{:.2}, {:.2}, {:.2}]; flat z = {:.2}, vs closed form {:.5}: z_lhs = {:.2}, z_rhs = {:.2}",
            zs[0], zs[1], zs[2], r.z, closed, z_l, z_r
        ),
        json!({ "sphere": rows, "flat": { "report": r, "closed_form": closed, "z_lhs": z_l, "z_rhs": z_r } }),
    ))
}

fn c4_convergence(b: &Budget, seed: u64) -> Result<Criterion> {
    let s2 = Manifold::sphere(2, 1.0);
    let o = s2.origin();
    let delta = 0.9 * s2.inj_radius;
    let target = (-1.0f64 / 3.0).exp();
    let ns = [4usize, 8, 16];
    let mut masses = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        masses.push(nu_total_mass(&s2, &o, n, delta, b.mass_samples, seed + k as u64)?);
    }
    let values: Vec<f64> = masses.iter().map(|m| m.value).collect();
    let (extrap, second) = richardson(&ns, &values);
    let mass_gap = (extrap - target).abs() / target;
    let axis = s2.ambient_dim() - 1;
    let wiener = heat_kernel_expectation(&s2, &o, 1.0, |y: &Point| y[axis], 64)?;
    let reference = target * wiener;
    let conv_ns = [2usize, 4, 8, 16];
    let table = convergence_study(&s2, &o, |p| p.point(p.n())[axis], &conv_ns, delta, b.conv_samples, seed + 100, reference)?;
    let gaps: Vec<f64> = table.rows.iter().map(|r| r.gap).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let final_gap = *gaps.last().expect("nonempty");
    let pass = mass_gap < 0.02 && monotone && final_gap < 0.02;
    Ok(crit(
        4,
        "approximation measure convergence",
        pass,
        format!(
            "extrapolated mass {extrap:.5} vs {target:.5} ({:.2}%); endpoint-height gaps {} ({})",
            100.0 * mass_gap,
            gaps.iter().map(|g| format!("{:.2}%", 100.0 * g)).collect::<Vec<_>>().join(" -> "),
            if monotone { "monotone" } else { "not monotone" }
        ),
        json!({ "masses": masses, "richardson_first_order": extrap, "richardson_second_order": second,
                "target": target, "mass_relative_gap": mass_gap, "wiener_reference": wiener,
                "functional": "height of gamma(1) along the base point", "table": table }),
    ))
}

/// Random admissible path: each increment has a uniform direction and a length uniform in [0, delta).
fn random_admissible<R: Rng>(m: &Manifold, n: usize, delta: f64, rng: &mut R) -> Result<(crate::pathgrid::DiscretePath, crate::pathgrid::FramePath)> {
    let o = m.origin();
    let incs: Vec<DVector<f64>> = (0..n)
        .map(|_| {
            let g: DVector<f64> = DVector::from_fn(m.dim, |_, _| rng.sample(StandardNormal));
            let len = rng.random::<f64>() * delta * 0.999;
            g.normalize() * len
        })
        .collect();
    develop(m, &o, &m.reference_frame(&o), &incs, delta)
}

fn c5_jacobi(b: &Budget, seed: u64) -> Result<Criterion> {
    let s2 = Manifold::sphere(2, 1.0);
    let o = s2.origin();
    let u = s2.reference_frame(&o);
    let eps = 0.125;
    let dir = DVector::from_vec(vec![0.6, 0.8]);
    let sizes: Vec<f64> = (0..8).map(|k| 0.02 * 15f64.powf(k as f64 / 7.0)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = Vec::new();
    for &s in &sizes {
        let r = remainder_expansion(&s2, &u, &(&dir * s), 0, eps, eps)?;
        xs.push(s.ln());
        ys.push(r.remainder.ln());
        rows.push(json!({ "delta_b": s, "remainder": r.remainder }));
    }
    let slope = ls_slope(&xs, &ys);
    let slope_ok = (2.7..=3.3).contains(&slope);
    let delta = default_delta(&s2);
    let results: Vec<Result<(f64, usize)>> = (0..b.sup_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let n = rng.random_range(4..=16);
            let (path, frames) = random_admissible(&s2, n, delta, &mut rng)?;
            let incs = anti_development(&s2, &path, &frames)?;
            let bound = sup_bound(s2.kappa0, delta, path.eps());
            let mut worst: f64 = f64::NEG_INFINITY;
            let mut fields = 0;
            for i in 1..=n {
                for a in 0..s2.dim {
                    let h = jacobi_basis(&s2, &path, &frames, &incs, a, i)?;
                    worst = worst.max(h.sup_norm() / bound);
                    fields += 1;
                }
            }
            Ok((worst, fields))
        })
        .collect();
    let mut worst_ratio: f64 = 0.0;
    let mut fields = 0;
    for r in results {
        let (w, f) = r?;
        worst_ratio = worst_ratio.max(w);
        fields += f;
    }
    let sup_ok = worst_ratio <= 1.0;
    Ok(crit(
        5,
        "Jacobi field remainder and sup bound",
        slope_ok && sup_ok,
        format!(
            "remainder exponent {slope:.3} (target [2.7, 3.3]); sup ratio max {worst_ratio:.3} over {fields} fields on {} paths",
            b.sup_paths
        ),
        json!({ "eps": eps, "remainders": rows, "slope": slope, "slope_ok": slope_ok,
                "delta": delta, "worst_sup_over_bound": worst_ratio, "fields": fields, "sup_ok": sup_ok }),
    ))
}

fn c6_drift(_b: &Budget, _seed: u64) -> Result<Criterion> {
    let ns = [8usize, 16, 32, 64, 128];
    let s2 = Manifold::sphere(2, 1.0);
    let gc = drift_limit_study(&s2, &SmoothPath::GreatCircle { speed: 1.0 }, &ns)?;
    let decreasing = gc.rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    let e2 = Manifold::euclidean(2);
    let sine = drift_limit_study(&e2, &SmoothPath::FlatSine { axis: 0, amplitude: 0.3 }, &ns)?;
    let pass = decreasing && gc.slope >= 0.8 && (sine.slope - 2.0).abs() <= 0.2;
    Ok(crit(
        6,
        "continuum drift limit",
        pass,
        format!("great circle slope {:.3} ({}); flat sine order {:.3}", gc.slope, if decreasing { "decreasing" } else { "not decreasing" }, sine.slope),
        json!({ "great_circle": gc, "flat_sine": sine }),
    ))
}

fn c7_constants(b: &Budget, seed: u64) -> Result<Criterion> {
    let four_over_pi2 = 4.0 / (PI * PI);
    let e = einstein_lsi_constant(1e-3, 1, 10_000)?;
    let einstein_gap = (e.value - four_over_pi2).abs();
    let einstein_ok = einstein_gap < 1e-4;
    let mut cont_gap: f64 = 0.0;
    for k in [1e-3, -1e-3] {
        cont_gap = cont_gap.max((lsi_constant_direct(k) - lsi_constant_taylor(k)).abs());
    }
    let limit_gap = (lsi_constant(0.0) - 0.5).abs().max((lsi_constant(1e-9) - 0.5).abs()).max((lsi_constant(-1e-9) - 0.5).abs());
    let continuity_ok = cont_gap < 1e-10 && limit_gap < 1e-8;
    let ks = [-2.0, -1.0, -0.5, 0.5, 1.0];
    let mut order_ok = true;
    let mut order_rows = Vec::new();
    for &k in &ks {
        let c = lsi_constant(k);
        let ct = gourcy_wu_constant(k)?;
        order_ok &= c <= ct;
        order_rows.push(json!({ "k": k, "c": c, "c_tilde": ct }));
    }
    let worst = flow_paths_check(b.flow_paths, seed)?;
    let flow_ok = worst <= 1e-8;
    let pass = einstein_ok && continuity_ok && order_ok && flow_ok;
    Ok(crit(
        7,
        "functional-inequality constants",
        pass,
        format!(
            "Einstein |C(1e-3) - 4/pi^2| = {einstein_gap:.3e} ({}); continuity {cont_gap:.1e}, limit {limit_gap:.1e} ({}); C <= C~ ({}); flow bound slack {worst:.2e} ({})",
            ok(einstein_ok), ok(continuity_ok), ok(order_ok), ok(flow_ok)
        ),
        json!({ "einstein": e, "einstein_gap": einstein_gap, "einstein_ok": einstein_ok,
                "taylor_vs_direct": cont_gap, "limit_gap": limit_gap, "continuity_ok": continuity_ok,
                "ordering": order_rows, "ordering_ok": order_ok,
                "flow_paths": b.flow_paths, "flow_worst_slack": worst, "flow_ok": flow_ok }),
    ))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

/// Worst slack of the flow-matrix norm bound over random horizontal frame paths on S^2 and H^2.
fn flow_paths_check(paths: usize, seed: u64) -> Result<f64> {
    let spaces = [Manifold::sphere(2, 1.0), Manifold::hyperbolic(2, 1.0)];
    let results: Vec<Result<f64>> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let m = &spaces[k % 2];
            let mut rng = stream(seed, k as u64);
            let n = 32;
            let part = Partition::new(n)?;
            let (path, _) = brownian_path_sample(m, &m.origin(), part, m.inj_radius.min(3.0), 1, &mut rng)?;
            let frames = horizontal_lift(m, &path, &m.reference_frame(&path.origin))?;
            let ric = ricci_samples(m, &frames.frames);
            let times = part.times();
            let ms = ricci_flow_matrix(&ric, &times)?;
            let kk = -m.ricci_constant();
            Ok(flow_bound(&ms, &times, kk)?.worst_slack)
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(worst)
}

fn c8_qv(b: &Budget, seed: u64) -> Result<Criterion> {
    let m = Manifold::sphere(2, 3.0);
    let n = 8;
    let delta = default_delta(&m);
    let part = Partition::new(n)?;
    let c = 0.005;
    let states: Result<Vec<SheState>> = (0..b.qv_trajectories)
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let (path, _) = brownian_path_sample(&m, &m.origin(), part, delta, 4, &mut rng)?;
            let mut settings = SheSettings::with_default_dt(Variant::Full, part.eps);
            settings.dt = c * part.eps * part.eps;
            SheState::new(&m, path, &m.reference_frame(&m.origin()), settings, rng)
        })
        .collect();
    let (index, axis) = (n / 2, 0);
    let r = qv_check(&m, states?, index, axis, 1.0)?;
    let pass = (0.95..=1.05).contains(&r.ratio);
    Ok(crit(
        8,
        "quadratic variation",
        pass,
        format!("realized/predicted = {:.4} over t = 1 ({} trajectories, {} steps)", r.ratio, r.trajectories, r.steps),
        json!({ "radius": 3.0, "n": n, "delta": delta, "dt_over_eps2": c, "grid_index": index, "axis": axis, "report": r }),
    ))
}

fn c9_gradient(_b: &Budget, _seed: u64) -> Result<Criterion> {
    let s2 = Manifold::sphere(2, 1.0);
    let o = s2.origin();
    let tilted = s2.exp(&o, &DVector::from_vec(vec![0.4, -0.3, 0.0]));
    let cases: Vec<(PointFunction, f64, f64, Point)> = vec![
        (PointFunction::Coord { axis: 0 }, 1.0, 0.1, o.clone()),
        (PointFunction::Coord { axis: 0 }, 0.5, 0.2, o.clone()),
        (PointFunction::Coord { axis: 2 }, 2.0, 0.5, tilted.clone()),
        (PointFunction::CosCoord { axis: 1, freq: 2.0 }, 1.5, 0.3, tilted),
        (PointFunction::Coord { axis: 1 }, 3.0, 1.0, o.clone()),
    ];
    let mut pass = true;
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    for (f, t1, t2, y) in &cases {
        let r = gradient_ineq_check(&s2, f, *t1, *t2, y)?;
        let case_ok = r.margin >= -3.0 * r.quadrature_error;
        pass &= case_ok;
        worst = worst.min(r.margin / r.quadrature_error.max(1e-300));
        rows.push(json!({ "f": f, "t1": t1, "t2": t2, "report": r, "ok": case_ok }));
    }
    let e2 = Manifold::euclidean(2);
    let lin = gradient_ineq_check(&e2, &PointFunction::Coord { axis: 0 }, 1.0, 0.2, &e2.origin())?;
    let eq_gap = (lin.rhs - lin.lhs).abs();
    let flat_ok = eq_gap <= 1e-8;
    pass &= flat_ok;
    Ok(crit(
        9,
        "gradient inequality",
        pass,
        format!(
            "sphere margins {} ; flat |rhs - lhs| = {eq_gap:.2e}",
            rows.iter().map(|r| format!("{:.4}", r["report"]["margin"].as_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(", ")
        ),
        json!({ "sphere": rows, "worst_margin_in_quadrature_errors": worst, "flat": lin, "flat_equality_gap": eq_gap }),
    ))
}

fn c10_gauge(_b: &Budget, seed: u64) -> Result<Criterion> {
    let s2 = Manifold::sphere(2, 1.0);
    let n = 8;
    let delta = default_delta(&s2);
    let mut rng = stream(seed, 0);
    let (path, frames_a) = random_admissible(&s2, n, delta, &mut rng)?;
    let theta: f64 = 0.7;
    let g = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
    let u0 = s2.rotate_frame(&frames_a.frames[0], &g);
    let frames_b = horizontal_lift(&s2, &path, &u0)?;
    let f = CylinderFunction::new(
        Outer::Product,
        vec![Inner::TimeIntegral { axis: 0 }, Inner::SquaredIntegral { axis: 1 }],
    )?;
    let mut worst: f64 = 0.0;
    let da = l2_gradient(&s2, &f, &path, &frames_a)?;
    let db = l2_gradient(&s2, &f, &path, &frames_b)?;
    for (x, y) in da.iter().zip(&db) {
        worst = worst.max((x.norm_squared() - y.norm_squared()).abs());
    }
    let ea = energy_summands(&s2, &f, &path, &frames_a)?;
    let eb = energy_summands(&s2, &f, &path, &frames_b)?;
    for (x, y) in ea.iter().zip(&eb) {
        worst = worst.max((x - y).abs());
    }
    let xa = drift_field_full(&s2, &path, &frames_a)?;
    let xb = drift_field_full(&s2, &path, &frames_b)?;
    let mut drift_worst: f64 = 0.0;
    for (x, y) in xa.vectors.iter().zip(&xb.vectors) {
        drift_worst = drift_worst.max((x - y).amax());
    }
    let pass = worst <= 1e-10 && drift_worst <= 1e-10;
    Ok(crit(
        10,
        "frame-gauge invariance",
        pass,
        format!("|DF|^2 and energy summands differ by {worst:.2e}; drift field by {drift_worst:.2e}"),
        json!({ "rotation_angle": theta, "gradient_and_energy_max_diff": worst, "drift_max_diff": drift_worst }),
    ))
}
