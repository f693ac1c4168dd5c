//! Cylinder functions, their L2 gradient, and integration-by-parts checks.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{horizontal_brownian, run_until, SheState};
use crate::error::{Error, Result};
use crate::geometry::{Manifold, Tangent};
use crate::pathgrid::{horizontal_lift, DiscretePath, FramePath};
use crate::stats::{mean_stderr, stream};

/// Inner integrand g(s, x) together with its quadrature rule on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inner {
    /// x^axis at grid index j.
    AmbientCoord { index: usize, axis: usize },
    /// int_0^1 x_s^axis ds.
    TimeIntegral { axis: usize },
    /// int_0^1 (x_s^axis)^2 ds.
    SquaredIntegral { axis: usize },
}

impl Inner {
    fn g(&self, x: &DVector<f64>) -> f64 {
        match self {
            Inner::AmbientCoord { axis, .. } | Inner::TimeIntegral { axis } => x[*axis],
            Inner::SquaredIntegral { axis } => x[*axis] * x[*axis],
        }
    }

    fn ambient_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        match self {
            Inner::AmbientCoord { axis, .. } | Inner::TimeIntegral { axis } => g[*axis] = 1.0,
            Inner::SquaredIntegral { axis } => g[*axis] = 2.0 * x[*axis],
        }
        g
    }

    /// Quadrature coefficients c_i with I = sum_i c_i g(s_i, x_i), i = 0..n.
    fn coefficients(&self, path: &DiscretePath) -> Result<Vec<f64>> {
        match self {
            Inner::AmbientCoord { index, .. } => {
                if *index > path.n() {
                    return Err(Error::Config(format!("grid index {index} beyond n = {}", path.n())));
                }
                let mut c = vec![0.0; path.n() + 1];
                c[*index] = 1.0;
                Ok(c)
            }
            _ => Ok(path.partition.trapezoid_weights()),
        }
    }

    fn axis(&self) -> usize {
        match self {
            Inner::AmbientCoord { axis, .. } | Inner::TimeIntegral { axis } | Inner::SquaredIntegral { axis } => *axis,
        }
    }
}

/// Outer function f: R^m -> R.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outer {
    Identity,
    Square,
    Sin,
    Cos,
    /// e^{c y}.
    Exp { c: f64 },
    /// a + b y.
    Affine { a: f64, b: f64 },
    /// sum_j w_j y_j.
    Linear { weights: Vec<f64> },
    /// y_1 y_2.
    Product,
}

impl Outer {
    fn arity(&self) -> Option<usize> {
        match self {
            Outer::Linear { weights } => Some(weights.len()),
            Outer::Product => Some(2),
            _ => Some(1),
        }
    }

    fn value(&self, y: &[f64]) -> f64 {
        match self {
            Outer::Identity => y[0],
            Outer::Square => y[0] * y[0],
            Outer::Sin => y[0].sin(),
            Outer::Cos => y[0].cos(),
            Outer::Exp { c } => (c * y[0]).exp(),
            Outer::Affine { a, b } => a + b * y[0],
            Outer::Linear { weights } => weights.iter().zip(y).map(|(w, v)| w * v).sum(),
            Outer::Product => y[0] * y[1],
        }
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Outer::Identity => vec![1.0],
            Outer::Square => vec![2.0 * y[0]],
            Outer::Sin => vec![y[0].cos()],
            Outer::Cos => vec![-y[0].sin()],
            Outer::Exp { c } => vec![c * (c * y[0]).exp()],
            Outer::Affine { b, .. } => vec![*b],
            Outer::Linear { weights } => weights.clone(),
            Outer::Product => vec![y[1], y[0]],
        }
    }
}

/// F(gamma) = f(I_1, ..., I_m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderFunction {
    pub outer: Outer,
    pub inner: Vec<Inner>,
}

impl CylinderFunction {
    pub fn new(outer: Outer, inner: Vec<Inner>) -> Result<Self> {
        if inner.is_empty() || outer.arity() != Some(inner.len()) {
            return Err(Error::Config(format!("outer function {outer:?} does not take {} arguments", inner.len())));
        }
        Ok(Self { outer, inner })
    }

    pub fn constant(c: f64) -> Self {
        Self { outer: Outer::Affine { a: c, b: 0.0 }, inner: vec![Inner::TimeIntegral { axis: 0 }] }
    }

    /// Built-in functional by name: `ambient_coord(j, axis)`, `time_integral(axis)`,
    /// `squared_integral(axis)`, optionally wrapped as `sin(...)`, `cos(...)`, `square(...)`.
    pub fn parse(name: &str) -> Result<Self> {
        let s: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        let (outer, rest) = match s.split_once('(') {
            Some((head @ ("sin" | "cos" | "square"), tail)) if tail.ends_with(')') => {
                let o = match head {
                    "sin" => Outer::Sin,
                    "cos" => Outer::Cos,
                    _ => Outer::Square,
                };
                (o, tail[..tail.len() - 1].to_string())
            }
            _ => (Outer::Identity, s.clone()),
        };
        let bad = || Error::Config(format!("unknown functional '{name}'"));
        let (head, args) = rest.split_once('(').ok_or_else(bad)?;
        let args = args.strip_suffix(')').ok_or_else(bad)?;
        let nums: Vec<usize> = args
            .split(',')
            .map(|a| a.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let inner = match (head, nums.as_slice()) {
            ("ambient_coord", [j, axis]) => Inner::AmbientCoord { index: *j, axis: *axis },
            ("time_integral", [axis]) => Inner::TimeIntegral { axis: *axis },
            ("squared_integral", [axis]) => Inner::SquaredIntegral { axis: *axis },
            _ => return Err(bad()),
        };
        Self::new(outer, vec![inner])
    }

    fn check(&self, m: &Manifold, path: &DiscretePath) -> Result<()> {
        for g in &self.inner {
            if g.axis() >= m.ambient_dim() {
                return Err(Error::Config(format!("axis {} beyond ambient dimension {}", g.axis(), m.ambient_dim())));
            }
            g.coefficients(path)?;
        }
        Ok(())
    }

    fn inner_values(&self, path: &DiscretePath) -> Result<Vec<f64>> {
        self.inner
            .iter()
            .map(|g| {
                let c = g.coefficients(path)?;
                Ok((0..=path.n()).map(|i| c[i] * g.g(path.point(i))).sum())
            })
            .collect()
    }
}

pub fn eval_cylinder(m: &Manifold, f: &CylinderFunction, path: &DiscretePath) -> Result<f64> {
    f.check(m, path)?;
    Ok(f.outer.value(&f.inner_values(path)?))
}

/// DF(gamma)(s_i) as ambient tangent vectors at x_i, i = 0..n. The L2 density of a
/// grid functional sum_i c_i g(x_i) is c_i / w_i times the gradient, w the trapezoid weights.
fn gradient_vectors(m: &Manifold, f: &CylinderFunction, path: &DiscretePath) -> Result<Vec<Tangent>> {
    f.check(m, path)?;
    let df = f.outer.gradient(&f.inner_values(path)?);
    let w = path.partition.trapezoid_weights();
    let coeffs: Vec<Vec<f64>> = f.inner.iter().map(|g| g.coefficients(path)).collect::<Result<_>>()?;
    Ok((0..=path.n())
        .map(|i| {
            let x = path.point(i);
            let mut amb = DVector::zeros(m.ambient_dim());
            for (j, g) in f.inner.iter().enumerate() {
                let c = df[j] * coeffs[j][i] / w[i];
                if c != 0.0 {
                    amb += g.ambient_grad(x) * c;
                }
            }
            m.riemannian_gradient(x, &amb)
        })
        .collect())
}

/// DF(gamma)(s_i) = sum_j d_j f u(s_i)^{-1} grad g_j(s_i, x_i) in frame coordinates, indexed by i = 0..n.
pub fn l2_gradient(m: &Manifold, f: &CylinderFunction, path: &DiscretePath, frames: &FramePath) -> Result<Vec<DVector<f64>>> {
    let vs = gradient_vectors(m, f, path)?;
    Ok(vs.iter().zip(&frames.frames).map(|(v, u)| m.frame_coords(u, v)).collect())
}

/// Direction h: [0, 1] -> R^d with h(0) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectionField {
    /// h(s) = s v.
    Linear { v: Vec<f64> },
    /// h(s) = sin(freq pi s / 2) v.
    Sine { v: Vec<f64>, freq: f64 },
    /// h(s) = s (1 - s) v, a loop direction.
    Bridge { v: Vec<f64> },
    Zero { dim: usize },
}

impl DirectionField {
    fn vector(&self) -> DVector<f64> {
        match self {
            DirectionField::Linear { v } | DirectionField::Sine { v, .. } | DirectionField::Bridge { v } => {
                DVector::from_column_slice(v)
            }
            DirectionField::Zero { dim } => DVector::zeros(*dim),
        }
    }

    pub fn value(&self, s: f64) -> DVector<f64> {
        let c = match self {
            DirectionField::Linear { .. } => s,
            DirectionField::Sine { freq, .. } => (freq * std::f64::consts::PI * s / 2.0).sin(),
            DirectionField::Bridge { .. } => s * (1.0 - s),
            DirectionField::Zero { .. } => 0.0,
        };
        self.vector() * c
    }

    pub fn derivative(&self, s: f64) -> DVector<f64> {
        let c = match self {
            DirectionField::Linear { .. } => 1.0,
            DirectionField::Sine { freq, .. } => {
                let w = freq * std::f64::consts::PI / 2.0;
                w * (w * s).cos()
            }
            DirectionField::Bridge { .. } => 1.0 - 2.0 * s,
            DirectionField::Zero { .. } => 0.0,
        };
        self.vector() * c
    }

    pub fn is_loop(&self) -> bool {
        matches!(self, DirectionField::Bridge { .. } | DirectionField::Zero { .. })
    }

    /// int_0^1 |h'|^2 ds.
    pub fn cameron_martin_norm2(&self) -> f64 {
        let v2 = self.vector().norm_squared();
        match self {
            DirectionField::Linear { .. } => v2,
            DirectionField::Sine { freq, .. } => {
                let w = freq * std::f64::consts::PI / 2.0;
                v2 * w * w * (0.5 + (2.0 * w).sin() / (4.0 * w))
            }
            DirectionField::Bridge { .. } => v2 / 3.0,
            DirectionField::Zero { .. } => 0.0,
        }
    }

    fn check(&self, m: &Manifold) -> Result<()> {
        if self.vector().len() != m.dim {
            return Err(Error::Config(format!("direction has {} components, manifold dimension is {}", self.vector().len(), m.dim)));
        }
        Ok(())
    }
}

/// D_h F = sum_i w_i <DF(s_i), h(s_i)> with trapezoid weights.
pub fn directional_derivative(
    m: &Manifold,
    f: &CylinderFunction,
    path: &DiscretePath,
    frames: &FramePath,
    h: &DirectionField,
) -> Result<f64> {
    h.check(m)?;
    let df = l2_gradient(m, f, path, frames)?;
    let w = path.partition.trapezoid_weights();
    Ok((0..=path.n()).map(|i| w[i] * df[i].dot(&h.value(path.partition.time(i)))).sum())
}

/// Central difference of F along x_i -> exp(x_i, +-tau u(s_i) h(s_i)).
pub fn directional_derivative_fd(
    m: &Manifold,
    f: &CylinderFunction,
    path: &DiscretePath,
    frames: &FramePath,
    h: &DirectionField,
    tau: f64,
) -> Result<f64> {
    h.check(m)?;
    let shifted = |sign: f64| {
        let pts = (1..=path.n())
            .map(|i| {
                let v = frames.frames[i].apply(&h.value(path.partition.time(i)));
                m.exp(path.point(i), &(v * (sign * tau)))
            })
            .collect();
        eval_cylinder(m, f, &path.with_points(pts))
    };
    Ok((shifted(1.0)? - shifted(-1.0)?) / (2.0 * tau))
}

/// Per-node summands (1/2) w_i |DF(s_i)|^2 of the Dirichlet energy, i = 0..n.
pub fn energy_summands(m: &Manifold, f: &CylinderFunction, path: &DiscretePath, frames: &FramePath) -> Result<Vec<f64>> {
    let df = l2_gradient(m, f, path, frames)?;
    let w = path.partition.trapezoid_weights();
    Ok(df.iter().zip(&w).map(|(v, wi)| 0.5 * wi * v.norm_squared()).collect())
}

/// MC estimate of (1/2) E|DF|^2_{L2} over the ensemble, with its standard error.
pub fn dirichlet_energy(m: &Manifold, f: &CylinderFunction, ensemble: &[DiscretePath]) -> Result<(f64, f64)> {
    let vals: Result<Vec<f64>> = ensemble
        .par_iter()
        .map(|p| {
            let frames = horizontal_lift(m, p, &m.reference_frame(&p.origin))?;
            Ok(energy_summands(m, f, p, &frames)?.iter().sum())
        })
        .collect();
    Ok(mean_stderr(&vals?))
}

/// beta_h = sum_i <(h(s_i) - h(s_{i-1})) / dt + (1/2) Ric_{u(s_{i-1})} h(s_{i-1}), Delta B_i>,
/// a left-point discretization of int <h' + (1/2) Ric_U h, dB>.
pub fn beta_h(
    m: &Manifold,
    path: &DiscretePath,
    frames: &FramePath,
    increments: Option<&[DVector<f64>]>,
    h: &DirectionField,
    use_ricci: bool,
) -> Result<f64> {
    let db = increments.ok_or_else(|| Error::Provenance("beta_h needs the driving increments of the sampler".into()))?;
    if db.len() != path.n() {
        return Err(Error::Provenance(format!("{} increments for {} intervals", db.len(), path.n())));
    }
    h.check(m)?;
    let part = path.partition;
    let mut total = 0.0;
    for i in 1..=path.n() {
        let h0 = h.value(part.time(i - 1));
        let mut integrand = (h.value(part.time(i)) - &h0) / part.eps;
        if use_ricci {
            let u = &frames.frames[i - 1];
            let ric = m.ricci_with_frame(u, &u.apply(&h0));
            integrand += m.frame_coords(u, &ric) * 0.5;
        }
        total += integrand.dot(&db[i - 1]);
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct IbpReport {
    pub lhs: f64,
    pub rhs: f64,
    pub stderr_lhs: f64,
    pub stderr_rhs: f64,
    /// Standard error of the paired difference D_hF - F beta_h.
    pub stderr: f64,
    pub z: f64,
    pub samples: usize,
    pub steps: usize,
}

/// Monte Carlo comparison of E[D_h F] and E[F beta_h] over horizontal Brownian draws.
pub fn ibp_check(
    m: &Manifold,
    f: &CylinderFunction,
    h: &DirectionField,
    samples: usize,
    steps: usize,
    seed: u64,
) -> Result<IbpReport> {
    let origin = m.origin();
    let frame0 = m.reference_frame(&origin);
    let dt = 1.0 / steps as f64;
    let draws: Result<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let hs = horizontal_brownian(m, &origin, &frame0, dt, steps, &mut rng)?;
            let dh = directional_derivative(m, f, &hs.path, &hs.frames, h)?;
            let fv = eval_cylinder(m, f, &hs.path)?;
            let b = beta_h(m, &hs.path, &hs.frames, Some(&hs.increments), h, true)?;
            Ok((dh, fv * b))
        })
        .collect();
    let draws = draws?;
    let l: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let r: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let diff: Vec<f64> = draws.iter().map(|d| d.0 - d.1).collect();
    let (lhs, stderr_lhs) = mean_stderr(&l);
    let (rhs, stderr_rhs) = mean_stderr(&r);
    let (gap, stderr) = mean_stderr(&diff);
    let z = if stderr > 0.0 { gap / stderr } else if gap == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(IbpReport { lhs, rhs, stderr_lhs, stderr_rhs, stderr, z, samples, steps })
}

#[derive(Clone, Debug, Serialize)]
pub struct QvReport {
    pub realized: f64,
    pub predicted: f64,
    pub ratio: f64,
    pub relative_error: f64,
    pub trajectories: usize,
    pub steps: usize,
}

/// Realized quadratic variation of u = x_index^axis along she trajectories, after removing
/// the drift compensator, against (1/eps) int |grad u|^2 dt.
pub fn qv_check(m: &Manifold, states: Vec<SheState>, index: usize, axis: usize, t_end: f64) -> Result<QvReport> {
    if let Some(s) = states.first() {
        if index == 0 || index > s.path.n() || axis >= m.ambient_dim() {
            return Err(Error::Config(format!("coordinate functional ({index}, {axis}) out of range")));
        }
    }
    let per: Result<Vec<(f64, f64, usize)>> = states
        .into_par_iter()
        .map(|mut state| {
            let eps = state.path.eps();
            let mut e = DVector::zeros(m.ambient_dim());
            e[axis] = 1.0;
            let mut realized = 0.0;
            let mut predicted = 0.0;
            let steps = run_until(m, &mut state, t_end, |now, rec, before| {
                let x0 = before.point(index);
                let x1 = now.path.point(index);
                let grad = m.riemannian_gradient(x0, &e);
                let comp = m.inner(&grad, &rec.drift_start[index - 1]) * rec.dt;
                let du = x1[axis] - x0[axis] - comp;
                realized += du * du;
                predicted += m.inner(&grad, &grad) / eps * rec.dt;
            })?;
            Ok((realized, predicted, steps))
        })
        .collect();
    let per = per?;
    let realized: f64 = per.iter().map(|p| p.0).sum();
    let predicted: f64 = per.iter().map(|p| p.1).sum();
    let steps = per.iter().map(|p| p.2).sum();
    let (ratio, relative_error) = if predicted == 0.0 {
        (if realized == 0.0 { 1.0 } else { f64::INFINITY }, if realized == 0.0 { 0.0 } else { f64::INFINITY })
    } else {
        (realized / predicted, (realized / predicted - 1.0).abs())
    };
    Ok(QvReport { realized, predicted, ratio, relative_error, trajectories: per.len(), steps })
}
