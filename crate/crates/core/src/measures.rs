//! The approximation measure nu_P^0 and the Wiener reference.

use gauss_quad::GaussLegendre;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::num::NonZeroUsize;

use crate::dynamics::brownian_path_sample;
use crate::error::{Error, Result};
use crate::geometry::{Manifold, ManifoldKind, ManifoldSpec, Point};
use crate::pathgrid::{energy, horizontal_lift, DiscretePath, Partition};
use crate::stats::{effective_sample_size, gelman_rubin, mean_stderr, stream};

#[derive(Clone, Debug, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub manifold: ManifoldSpec,
    pub samples: usize,
    /// Fraction of proposals that left H_P^delta (weight zero).
    pub truncated_fraction: f64,
    pub ess: f64,
}

/// Per-draw output of the sequential-increment importance sampler.
#[derive(Clone, Debug)]
pub struct WeightedDraw {
    pub weight: f64,
    pub value: f64,
}

/// Importance sampling of nu_P^0 with Gaussian increments N(0, eps I) pushed through
/// exp; the weight is the product of exp-Jacobians (zero outside H_P^delta), so the
/// mean weight is Z_P^{-1} int e^{-E/2} dVol. `f` is evaluated on accepted paths.
pub fn nu_importance<F>(
    m: &Manifold,
    origin: &Point,
    n: usize,
    delta: f64,
    samples: usize,
    seed: u64,
    f: Option<F>,
) -> Result<Vec<WeightedDraw>>
where
    F: Fn(&DiscretePath) -> f64 + Sync,
{
    let part = Partition::new(n)?;
    let sd = part.eps.sqrt();
    let frame0 = m.reference_frame(origin);
    let draws: Vec<WeightedDraw> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let mut weight = 1.0;
            let mut x = origin.clone();
            let mut u = frame0.clone();
            let mut points = Vec::with_capacity(if f.is_some() { n } else { 0 });
            for _ in 0..n {
                let a: DVector<f64> = DVector::from_fn(m.dim, |_, _| rng.sample::<f64, _>(StandardNormal) * sd);
                let r = a.norm();
                if !(r < delta) {
                    return WeightedDraw { weight: 0.0, value: 0.0 };
                }
                weight *= m.exp_jacobian(r);
                if f.is_some() {
                    let y = m.exp(&x, &u.apply(&a));
                    u = m.transport_frame(&u, &y).expect("step below injectivity radius");
                    points.push(y.clone());
                    x = y;
                }
            }
            let value = match &f {
                Some(f) => f(&DiscretePath { origin: origin.clone(), points, partition: part, delta }),
                None => 1.0,
            };
            WeightedDraw { weight, value }
        })
        .collect();
    Ok(draws)
}

fn check_delta_for_sampling(m: &Manifold, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= m.inj_radius) {
        return Err(Error::Config(format!(
            "delta {delta} must be positive and at most the injectivity radius {}",
            m.inj_radius
        )));
    }
    Ok(())
}

/// Z_P^{-1} int_{H_P^delta} e^{-E/2} dVol with Z_P = (sqrt(2 pi) eps)^{nd}.
pub fn nu_total_mass(m: &Manifold, origin: &Point, n: usize, delta: f64, samples: usize, seed: u64) -> Result<MassEstimate> {
    check_delta_for_sampling(m, delta)?;
    let draws = nu_importance::<fn(&DiscretePath) -> f64>(m, origin, n, delta, samples, seed, None)?;
    let w: Vec<f64> = draws.iter().map(|d| d.weight).collect();
    let (value, stderr) = mean_stderr(&w);
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    if ess < 0.01 * samples as f64 {
        return Err(Error::ProposalMismatch { ess, min: 0.01 * samples as f64 });
    }
    let truncated = w.iter().filter(|x| **x == 0.0).count() as f64 / samples as f64;
    Ok(MassEstimate {
        value,
        stderr,
        n,
        eps: 1.0 / n as f64,
        delta,
        manifold: m.spec.clone(),
        samples,
        truncated_fraction: truncated,
        ess,
    })
}

/// Unnormalized nu_P^0 expectation of f with its standard error.
pub fn nu_expectation<F>(
    m: &Manifold,
    origin: &Point,
    n: usize,
    delta: f64,
    samples: usize,
    seed: u64,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&DiscretePath) -> f64 + Sync,
{
    check_delta_for_sampling(m, delta)?;
    let draws = nu_importance(m, origin, n, delta, samples, seed, Some(f))?;
    let xs: Vec<f64> = draws.iter().map(|d| d.weight * d.value).collect();
    Ok(mean_stderr(&xs))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    /// Relative gap |estimate - reference| / |reference|.
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Unnormalized nu_P^0 expectations of `f` for each n, compared to `reference`.
pub fn convergence_study<F>(
    m: &Manifold,
    origin: &Point,
    f: F,
    ns: &[usize],
    delta: f64,
    samples: usize,
    seed: u64,
    reference: f64,
) -> Result<ConvergenceTable>
where
    F: Fn(&DiscretePath) -> f64 + Sync,
{
    let mut rows = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let (estimate, stderr) = nu_expectation(m, origin, n, delta, samples, seed.wrapping_add(k as u64 * 7919), &f)?;
        rows.push(ConvergenceRow {
            n,
            estimate,
            stderr,
            reference,
            gap: (estimate - reference).abs() / reference.abs(),
        });
    }
    Ok(ConvergenceTable { rows })
}

/// Richardson extrapolation assuming an error expansion in powers of 1/n, using the
/// two finest levels (first order) and, when three are given, a second-order fit.
pub fn richardson(ns: &[usize], values: &[f64]) -> (f64, Option<f64>) {
    let k = ns.len();
    let (n1, n2) = (ns[k - 2] as f64, ns[k - 1] as f64);
    let (v1, v2) = (values[k - 2], values[k - 1]);
    let first = (n2 * v2 - n1 * v1) / (n2 - n1);
    let second = if k >= 3 {
        // Fit v = a + b/n + c/n^2 through the last three levels.
        let n0 = ns[k - 3] as f64;
        let v0 = values[k - 3];
        let h = [1.0 / n0, 1.0 / n1, 1.0 / n2];
        let v = [v0, v1, v2];
        let mut a = 0.0;
        for i in 0..3 {
            let mut l = 1.0;
            for j in 0..3 {
                if i != j {
                    l *= (0.0 - h[j]) / (h[i] - h[j]);
                }
            }
            a += v[i] * l;
        }
        Some(a)
    } else {
        None
    };
    (first, second)
}

/// int p_t(o, y) f(y) dVol(y) by quadrature in geodesic polar coordinates around o
/// (Gauss-Legendre in the polar angle, trapezoid in the azimuth) on S^2, and by
/// Gauss-Legendre on the circle and on the line.
pub fn heat_kernel_expectation<F>(m: &Manifold, origin: &Point, t: f64, f: F, order: usize) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    let gl = GaussLegendre::new(NonZeroUsize::new(order).ok_or(Error::Config("quadrature order".into()))?);
    match (m.kind, m.dim) {
        (ManifoldKind::Sphere, 2) => {
            let r = m.radius;
            let u = m.reference_frame(origin);
            let e1 = u.cols.column(0).into_owned();
            let e2 = u.cols.column(1).into_owned();
            let n_phi = 2 * order;
            let mut total = 0.0;
            for &(x, w) in gl.as_node_weight_pairs() {
                let th = 0.5 * PI_ * (x + 1.0);
                let mut ring = 0.0;
                for k in 0..n_phi {
                    let ph = 2.0 * PI_ * k as f64 / n_phi as f64;
                    let dir = &e1 * ph.cos() + &e2 * ph.sin();
                    let y = origin * th.cos() + dir * (r * th.sin());
                    ring += f(&y);
                }
                ring *= 2.0 * PI_ / n_phi as f64;
                let p = crate::geometry::sphere_heat_kernel_unit(2, t / (r * r), th.cos()) / (r * r);
                total += 0.5 * PI_ * w * th.sin() * r * r * p * ring;
            }
            Ok(total)
        }
        (ManifoldKind::Torus, 1) => {
            let l = m.periods[0];
            let mut total = 0.0;
            for &(x, w) in gl.as_node_weight_pairs() {
                let off = 0.5 * l * x;
                let y = m.exp(origin, &DVector::from_element(1, off));
                total += 0.5 * l * w * m.heat_kernel(t, origin, &y)? * f(&y);
            }
            Ok(total)
        }
        _ => Err(Error::Unsupported(format!("heat-kernel quadrature on {:?} of dimension {}", m.kind, m.dim))),
    }
}

const PI_: f64 = std::f64::consts::PI;

/// Plain Monte Carlo under geodesic-random-walk Brownian paths.
pub fn wiener_expectation<F>(
    m: &Manifold,
    origin: &Point,
    f: F,
    n: usize,
    substeps: usize,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&DiscretePath) -> f64 + Sync,
{
    let part = Partition::new(n)?;
    let vals: Result<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let (path, _) = brownian_path_sample(m, origin, part, delta, substeps, &mut rng)?;
            Ok(f(&path))
        })
        .collect();
    Ok(mean_stderr(&vals?))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub tau0: f64,
    pub target_accept: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { chains: 4, burn_in: 2000, samples: 5000, thin: 2, tau0: 0.1, target_accept: 0.574 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub sampler: String,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub effective_sample_size: f64,
    pub gelman_rubin: f64,
    pub step_size: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub paths: Vec<DiscretePath>,
    pub weights: Option<Vec<f64>>,
    pub provenance: Provenance,
}

/// log of the normalized-up-to-constant nu density: -E/2, or -inf outside H_P^delta.
fn log_target(m: &Manifold, path: &DiscretePath) -> f64 {
    for i in 1..=path.n() {
        if !(m.dist(path.point(i - 1), path.point(i)) < path.delta) {
            return f64::NEG_INFINITY;
        }
    }
    -0.5 * energy(m, path)
}

/// grad_i log pi = (log_{x_i} x_{i-1} + log_{x_i} x_{i+1}) / eps (second term absent at i = n).
fn grad_log_target(m: &Manifold, path: &DiscretePath) -> Option<Vec<DVector<f64>>> {
    let n = path.n();
    let eps = path.eps();
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let x = path.point(i);
        let mut g = m.log(x, path.point(i - 1)).ok()?;
        if i < n {
            g += m.log(x, path.point(i + 1)).ok()?;
        }
        out.push(g / eps);
    }
    Some(out)
}

/// log q(x -> y) for the Langevin proposal y_i = exp(x_i, tau/2 g_i + sqrt(tau) xi_i),
/// w.r.t. the product Riemannian volume (includes the exp Jacobian).
fn log_proposal(m: &Manifold, x: &DiscretePath, grad: &[DVector<f64>], y: &DiscretePath, tau: f64) -> f64 {
    let d = m.dim as f64;
    let mut lp = 0.0;
    for i in 1..=x.n() {
        let v = match m.log(x.point(i), y.point(i)) {
            Ok(v) => v,
            Err(_) => return f64::NEG_INFINITY,
        };
        let r = m.norm(&v);
        let mean_shift = &v - &grad[i - 1] * (tau / 2.0);
        lp += -m.inner(&mean_shift, &mean_shift) / (2.0 * tau) - 0.5 * d * (2.0 * PI_ * tau).ln();
        lp -= m.exp_jacobian(r).ln();
    }
    lp
}

struct Chain {
    path: DiscretePath,
    logp: f64,
    grad: Vec<DVector<f64>>,
}

fn mala_step<R: Rng + ?Sized>(m: &Manifold, c: &mut Chain, tau: f64, rng: &mut R) -> bool {
    let n = c.path.n();
    let mut pts = Vec::with_capacity(n);
    for i in 1..=n {
        let x = c.path.point(i);
        let noise = m.random_tangent(x, tau.sqrt(), rng);
        let v = &c.grad[i - 1] * (tau / 2.0) + noise;
        if !(m.norm(&v) < m.inj_radius) {
            return false;
        }
        pts.push(m.exp(x, &v));
    }
    let y = c.path.with_points(pts);
    let logp_y = log_target(m, &y);
    if logp_y == f64::NEG_INFINITY {
        return false;
    }
    let grad_y = match grad_log_target(m, &y) {
        Some(g) => g,
        None => return false,
    };
    let fwd = log_proposal(m, &c.path, &c.grad, &y, tau);
    let bwd = log_proposal(m, &y, &grad_y, &c.path, tau);
    let log_alpha = logp_y - c.logp + bwd - fwd;
    if rng.random::<f64>().ln() < log_alpha {
        c.path = y;
        c.logp = logp_y;
        c.grad = grad_y;
        true
    } else {
        false
    }
}

/// Metropolis-adjusted Langevin sampling of the normalized nu_P^0 on H_P^delta.
/// Chains start from the geodesic-random-walk proposal, tune the step size during
/// burn-in towards the target acceptance, and are merged after a Gelman-Rubin
/// check on the energy.
pub fn nu_sample<S>(
    m: &Manifold,
    origin: &Point,
    n: usize,
    delta: f64,
    config: &ChainConfig,
    seed: u64,
    statistic: S,
) -> Result<PathEnsemble>
where
    S: Fn(&DiscretePath) -> f64 + Sync,
{
    check_delta_for_sampling(m, delta)?;
    let part = Partition::new(n)?;
    let frame0 = m.reference_frame(origin);
    let results: Vec<Result<(Vec<DiscretePath>, Vec<f64>, f64, f64)>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            let (start, _) = brownian_path_sample(m, origin, part, delta, 1, &mut rng)?;
            let _ = horizontal_lift(m, &start, &frame0)?;
            let logp = log_target(m, &start);
            let grad = grad_log_target(m, &start).ok_or(Error::Tuning("start outside domain".into()))?;
            let mut chain = Chain { path: start, logp, grad };
            let mut log_tau = (config.tau0 * part.eps).ln();
            for it in 0..config.burn_in {
                let acc = mala_step(m, &mut chain, log_tau.exp(), &mut rng);
                let gain = 1.0 / ((it + 1) as f64).powf(0.6);
                log_tau += gain * ((acc as u8 as f64) - config.target_accept);
            }
            let tau = log_tau.exp();
            let mut accepted = 0usize;
            let mut paths = Vec::with_capacity(config.samples);
            let mut stats = Vec::with_capacity(config.samples);
            for _ in 0..config.samples {
                for _ in 0..config.thin {
                    accepted += mala_step(m, &mut chain, tau, &mut rng) as usize;
                }
                stats.push(statistic(&chain.path));
                paths.push(chain.path.clone());
            }
            let rate = accepted as f64 / (config.samples * config.thin) as f64;
            Ok((paths, stats, rate, tau))
        })
        .collect();
    let mut paths = Vec::new();
    let mut stats = Vec::new();
    let mut rates = Vec::new();
    let mut taus = Vec::new();
    for r in results {
        let (p, s, rate, tau) = r?;
        paths.extend(p);
        stats.push(s);
        rates.push(rate);
        taus.push(tau);
    }
    let rate = rates.iter().sum::<f64>() / rates.len() as f64;
    if !(0.1..=0.9).contains(&rate) {
        return Err(Error::Tuning(format!("acceptance rate {rate:.3} outside [0.1, 0.9]")));
    }
    let rhat = if config.chains > 1 { gelman_rubin(&stats) } else { 1.0 };
    if !(rhat < 1.05) {
        return Err(Error::Tuning(format!("Gelman-Rubin statistic {rhat:.4} is not below 1.05")));
    }
    let ess: f64 = stats.iter().map(|s| effective_sample_size(s)).sum();
    Ok(PathEnsemble {
        paths,
        weights: None,
        provenance: Provenance {
            sampler: "mala".into(),
            seed,
            acceptance_rate: rate,
            effective_sample_size: ess,
            gelman_rubin: rhat,
            step_size: taus,
        },
    })
}
