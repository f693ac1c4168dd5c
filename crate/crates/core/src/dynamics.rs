//! Time integrators for the path-space heat flow and Brownian samplers on M.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::drift::{drift_field_full, drift_field_simple};
use crate::error::{Error, Result};
use crate::geometry::{Frame, Manifold, Point, Tangent};
use crate::jacobi::DeltaAdmissibility;
use crate::pathgrid::{check_delta, horizontal_lift, DiscretePath, FramePath, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Jacobi-frame noise with the full integration-by-parts drift.
    Full,
    /// Projection noise with the simple drift.
    Sigma,
    /// Exact spectral solver, Dirichlet-Neumann modes (path space).
    FlatDn,
    /// Exact spectral solver, Dirichlet-Dirichlet modes (loop space).
    FlatDd,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SheSettings {
    pub variant: Variant,
    pub dt: f64,
    pub max_halvings: usize,
    /// Multiplier on the noise; zero gives the deterministic drift flow.
    pub noise_scale: f64,
}

impl SheSettings {
    /// dt = c eps^2 with the default stability factor c = 0.1.
    pub fn with_default_dt(variant: Variant, eps: f64) -> Self {
        Self { variant, dt: 0.1 * eps * eps, max_halvings: 8, noise_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SheState {
    pub path: DiscretePath,
    pub frames: FramePath,
    pub t: f64,
    pub rng: ChaCha8Rng,
    pub settings: SheSettings,
}

impl SheState {
    pub fn new(m: &Manifold, path: DiscretePath, frame0: &Frame, settings: SheSettings, rng: ChaCha8Rng) -> Result<Self> {
        if matches!(settings.variant, Variant::FlatDn | Variant::FlatDd) {
            return Err(Error::Config("spectral variants use FlatSpectralState".into()));
        }
        if settings.variant == Variant::Full {
            DeltaAdmissibility::new(m.kappa0, path.delta).require()?;
        }
        check_delta(m, &path)?;
        let frames = horizontal_lift(m, &path, frame0)?;
        Ok(Self { path, frames, t: 0.0, rng, settings })
    }
}

/// One accepted step: the time advanced, how often it was halved, and the
/// drift vectors b(x) (the dt-coefficient, i.e. minus the X-field) at the start point.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub dt: f64,
    pub halvings: usize,
    pub drift_start: Vec<Tangent>,
}

fn retract(m: &Manifold, p: &Point, w: &DVector<f64>) -> Point {
    m.exp(p, &m.project_tangent(p, w))
}

/// Noise vectors sigma(x) xi at every grid point.
fn noise_vectors(m: &Manifold, variant: Variant, path: &DiscretePath, frames: &FramePath, xi: &[DVector<f64>]) -> Vec<Tangent> {
    let c = 1.0 / path.eps().sqrt();
    (1..=path.n())
        .map(|i| match variant {
            Variant::Full => frames.frames[i].apply(&xi[i - 1]) * c,
            _ => m.project_tangent(path.point(i), &xi[i - 1]) * c,
        })
        .collect()
}

fn drift_vectors(m: &Manifold, variant: Variant, path: &DiscretePath, frames: &FramePath) -> Result<Vec<Tangent>> {
    let field = match variant {
        Variant::Full => drift_field_full(m, path, frames)?,
        _ => drift_field_simple(m, path)?,
    };
    Ok(field.vectors.into_iter().map(|v| -v).collect())
}

fn heun_attempt(
    m: &Manifold,
    state: &SheState,
    drift0: &[Tangent],
    dt: f64,
    xi: &[DVector<f64>],
) -> Result<(DiscretePath, FramePath)> {
    let variant = state.settings.variant;
    let frame0 = &state.frames.frames[0];
    let path = &state.path;
    let sig0 = noise_vectors(m, variant, path, &state.frames, xi);
    let pred_pts: Vec<Point> = (1..=path.n())
        .map(|i| retract(m, path.point(i), &(&drift0[i - 1] * dt + &sig0[i - 1])))
        .collect();
    let pred = path.with_points(pred_pts);
    check_delta(m, &pred)?;
    let pred_frames = horizontal_lift(m, &pred, frame0)?;
    let drift1 = drift_vectors(m, variant, &pred, &pred_frames)?;
    let sig1 = noise_vectors(m, variant, &pred, &pred_frames, xi);
    let pts: Vec<Point> = (1..=path.n())
        .map(|i| {
            let k = i - 1;
            let w = (&drift0[k] + &drift1[k]) * (0.5 * dt) + (&sig0[k] + &sig1[k]) * 0.5;
            retract(m, path.point(i), &w)
        })
        .collect();
    let next = path.with_points(pts);
    check_delta(m, &next)?;
    let frames = horizontal_lift(m, &next, frame0)?;
    Ok((next, frames))
}

fn heun_step(m: &Manifold, state: &mut SheState, dt: f64) -> Result<StepRecord> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let variant = state.settings.variant;
    let drift0 = drift_vectors(m, variant, &state.path, &state.frames)?;
    let width = match variant {
        Variant::Full => m.dim,
        _ => m.ambient_dim(),
    };
    let n = state.path.n();
    let mut h = dt;
    let mut last_err = None;
    for halvings in 0..=state.settings.max_halvings {
        let sd = h.sqrt() * state.settings.noise_scale;
        let xi: Vec<DVector<f64>> = (0..n)
            .map(|_| DVector::from_fn(width, |_, _| state.rng.sample::<f64, _>(StandardNormal) * sd))
            .collect();
        match heun_attempt(m, state, &drift0, h, &xi) {
            Ok((path, frames)) => {
                state.path = path;
                state.frames = frames;
                state.t += h;
                return Ok(StepRecord { dt: h, halvings, drift_start: drift0 });
            }
            Err(e @ Error::DeltaViolation { .. }) | Err(e @ Error::CutLocus { .. }) => {
                last_err = Some(e);
                h /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::StepFailed {
        halvings: state.settings.max_halvings,
        source: Box::new(last_err.expect("at least one attempt")),
    })
}

/// One Heun step of dx_i = sum_a u(s_i) e_a / sqrt(eps) o dW^{a,i} - X^{beta_P}(s_i) dt.
pub fn she_step(m: &Manifold, state: &mut SheState, dt: f64) -> Result<StepRecord> {
    if state.settings.variant != Variant::Full {
        return Err(Error::Config("she_step needs the full variant".into()));
    }
    heun_step(m, state, dt)
}

/// One Heun step of dx_i = (1/sqrt(eps)) sum_a P_{x_i} e_a o dW^{a,i} - X^{beta_P^0}(s_i) dt.
pub fn she_step_sigma(m: &Manifold, state: &mut SheState, dt: f64) -> Result<StepRecord> {
    if state.settings.variant != Variant::Sigma {
        return Err(Error::Config("she_step_sigma needs the sigma variant".into()));
    }
    heun_step(m, state, dt)
}

/// Advance to time t_end with the configured dt, calling `observe` after each step.
pub fn run_until<F>(m: &Manifold, state: &mut SheState, t_end: f64, mut observe: F) -> Result<usize>
where
    F: FnMut(&SheState, &StepRecord, &DiscretePath),
{
    let mut steps = 0;
    while state.t < t_end - 1e-12 {
        let dt = state.settings.dt.min(t_end - state.t);
        let before = state.path.clone();
        let rec = match state.settings.variant {
            Variant::Full => she_step(m, state, dt)?,
            Variant::Sigma => she_step_sigma(m, state, dt)?,
            _ => return Err(Error::Config("spectral variants use FlatSpectralState".into())),
        };
        observe(state, &rec, &before);
        steps += 1;
    }
    Ok(steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Path space: X(0) = 0, X'(1) = 0.
    DirichletNeumann,
    /// Loop space: X(0) = X(1) = 0.
    DirichletDirichlet,
}

impl BasisKind {
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let w = self.frequency(k);
        w * w
    }

    pub fn frequency(&self, k: usize) -> f64 {
        match self {
            BasisKind::DirichletNeumann => (k as f64 + 0.5) * PI,
            BasisKind::DirichletDirichlet => (k as f64 + 1.0) * PI,
        }
    }

    /// sqrt(2) sin(w_k s).
    pub fn basis(&self, k: usize, s: f64) -> f64 {
        2f64.sqrt() * (self.frequency(k) * s).sin()
    }

    /// Upper bound on sum_{k >= modes} 1 / lambda_k.
    pub fn tail_bound(&self, modes: usize) -> f64 {
        let a = match self {
            BasisKind::DirichletNeumann => modes as f64 + 0.5,
            BasisKind::DirichletDirichlet => modes as f64 + 1.0,
        };
        (1.0 / (a * a) + 1.0 / a) / (PI * PI)
    }
}

/// Mode coefficients of the flat stochastic heat equation.
#[derive(Clone, Debug)]
pub struct FlatSpectralState {
    /// K x d matrix of mode coefficients.
    pub modes: DMatrix<f64>,
    pub kind: BasisKind,
    pub base: DVector<f64>,
}

impl FlatSpectralState {
    pub fn zero(kind: BasisKind, modes: usize, d: usize) -> Self {
        Self { modes: DMatrix::zeros(modes, d), kind, base: DVector::zeros(d) }
    }

    /// Field value X(s) = base + sum_k X_k phi_k(s).
    pub fn field(&self, s: f64) -> DVector<f64> {
        let mut out = self.base.clone();
        for k in 0..self.modes.nrows() {
            let phi = self.kind.basis(k, s);
            out += self.modes.row(k).transpose() * phi;
        }
        out
    }

    /// Stationary covariance sum_k phi_k(s) phi_k(s') / lambda_k of one coordinate.
    pub fn stationary_covariance(&self, s: f64, t: f64) -> f64 {
        (0..self.modes.nrows()).map(|k| self.kind.basis(k, s) * self.kind.basis(k, t) / self.kind.eigenvalue(k)).sum()
    }
}

/// Exact Ornstein-Uhlenbeck transition dX_k = -lambda_k X_k dt / 2 + dW_k over dt.
pub fn flat_she_exact<R: Rng + ?Sized>(state: &mut FlatSpectralState, dt: f64, rng: &mut R) {
    let (k_modes, d) = state.modes.shape();
    for k in 0..k_modes {
        let lam = state.kind.eigenvalue(k);
        let decay = (-lam * dt / 2.0).exp();
        let sd = (-(-lam * dt).exp_m1() / lam).sqrt();
        for a in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            state.modes[(k, a)] = decay * state.modes[(k, a)] + sd * z;
        }
    }
}

/// Geodesic random walk with `substeps` steps per grid interval; draws whose grid
/// increments break the delta constraint are redrawn. Returns the path and the
/// number of rejected draws.
pub fn brownian_path_sample<R: Rng + ?Sized>(
    m: &Manifold,
    origin: &Point,
    partition: Partition,
    delta: f64,
    substeps: usize,
    rng: &mut R,
) -> Result<(DiscretePath, usize)> {
    if substeps == 0 {
        return Err(Error::Config("substeps must be at least 1".into()));
    }
    let sd = (partition.eps / substeps as f64).sqrt();
    let mut rejected = 0usize;
    loop {
        let attempts = rejected + 1;
        if attempts > 20 && rejected as f64 / attempts as f64 > 0.5 {
            return Err(Error::Config(format!(
                "Brownian sampler rejects {rejected} of {attempts} draws; eps is too large for delta {delta}"
            )));
        }
        let mut x = origin.clone();
        let mut u = m.reference_frame(origin);
        let mut points = Vec::with_capacity(partition.n);
        let mut ok = true;
        for _ in 0..partition.n {
            let start = x.clone();
            for _ in 0..substeps {
                let a: DVector<f64> = DVector::from_fn(m.dim, |_, _| rng.sample::<f64, _>(StandardNormal) * sd);
                let y = m.exp(&x, &u.apply(&a));
                u = m.transport_frame(&u, &y)?;
                x = y;
            }
            if !(m.dist(&start, &x) < delta) {
                ok = false;
                break;
            }
            points.push(x.clone());
        }
        if ok {
            let path = DiscretePath { origin: origin.clone(), points, partition, delta };
            return Ok((path, rejected));
        }
        rejected += 1;
    }
}

/// Discretized horizontal Brownian motion with its driving increments.
#[derive(Clone, Debug)]
pub struct HorizontalSample {
    pub path: DiscretePath,
    pub frames: FramePath,
    /// Delta B_i = sqrt(dt) xi_i for i = 1..steps.
    pub increments: Vec<DVector<f64>>,
}

/// Frame-bundle Euler scheme: x_i = exp(x_{i-1}, u_{i-1} Delta B_i), frames transported.
pub fn horizontal_brownian<R: Rng + ?Sized>(
    m: &Manifold,
    origin: &Point,
    frame0: &Frame,
    dt: f64,
    steps: usize,
    rng: &mut R,
) -> Result<HorizontalSample> {
    if steps == 0 || ((dt * steps as f64) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("need dt * steps = 1, got {dt} * {steps}")));
    }
    let sd = dt.sqrt();
    let mut increments = Vec::with_capacity(steps);
    let mut points = Vec::with_capacity(steps);
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(frame0.clone());
    let mut x = origin.clone();
    for i in 0..steps {
        let db: DVector<f64> = DVector::from_fn(m.dim, |_, _| rng.sample::<f64, _>(StandardNormal) * sd);
        if !(db.norm() < m.inj_radius) {
            return Err(Error::DeltaViolation { interval: i + 1, dist: db.norm(), delta: m.inj_radius });
        }
        let y = m.exp(&x, &frames[i].apply(&db));
        let u = m.transport_frame(&frames[i], &y)?;
        frames.push(u);
        points.push(y.clone());
        increments.push(db);
        x = y;
    }
    let path = DiscretePath { origin: origin.clone(), points, partition: Partition::new(steps)?, delta: m.inj_radius };
    Ok(HorizontalSample { path, frames: FramePath { frames }, increments })
}
