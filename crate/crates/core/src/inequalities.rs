//! Log-Sobolev constants, the curvature-flow matrix, and empirical checks.

use gauss_quad::{GaussHermite, GaussLegendre};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

use crate::dynamics::brownian_path_sample;
use crate::error::{Error, Result};
use crate::functionals::{energy_summands, eval_cylinder, CylinderFunction};
use crate::geometry::{Manifold, ManifoldKind, Point};
use crate::measures::heat_kernel_expectation;
use crate::pathgrid::{horizontal_lift, Partition};
use crate::stats::{mean_stderr, stream};

/// Below this |K| the constants switch to their Taylor expansions.
pub const TAYLOR_CUTOFF: f64 = 1e-4;

fn first_term_direct(k: f64) -> f64 {
    (k.exp_m1() - k) / (k * k)
}

fn first_term_taylor(k: f64) -> f64 {
    0.5 + k / 6.0 + k * k / 24.0 + k * k * k / 120.0
}

/// C_0(K) in cancellation-free form: with a = e^{K/2} - 1, 2e^{K/2} - e^K = 1 - a^2.
fn c0_direct(k: f64) -> f64 {
    let a = (k / 2.0).exp_m1();
    if k < 0.0 {
        let disc = 1.0 - a * a;
        assert!(disc > 0.0, "2e^(K/2) - e^K must be positive for K < 0");
        4.0 * a * a / (k * k * (1.0 + disc.sqrt()))
    } else {
        2.0 * a * a / (k * k)
    }
}

fn c0_taylor(k: f64) -> f64 {
    if k < 0.0 {
        0.5 + k / 4.0 + 5.0 * k * k / 48.0 + 3.0 * k * k * k / 64.0
    } else {
        0.5 + k / 4.0 + 7.0 * k * k / 96.0 + k * k * k / 64.0
    }
}

pub fn c0(k: f64) -> f64 {
    if k.abs() < TAYLOR_CUTOFF {
        c0_taylor(k)
    } else {
        c0_direct(k)
    }
}

/// C(K) = min{(e^K - 1 - K)/K^2, C_0(K)}.
pub fn lsi_constant(k: f64) -> f64 {
    if k.abs() < TAYLOR_CUTOFF {
        lsi_constant_taylor(k)
    } else {
        lsi_constant_direct(k)
    }
}

pub fn lsi_constant_direct(k: f64) -> f64 {
    first_term_direct(k).min(c0_direct(k))
}

pub fn lsi_constant_taylor(k: f64) -> f64 {
    first_term_taylor(k).min(c0_taylor(k))
}

/// The Gourcy-Wu constant, with the same cancellation-free evaluation as C_0.
pub fn gourcy_wu_constant(k: f64) -> Result<f64> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::Domain(format!("Gourcy-Wu constant needs finite nonzero K, got {k}")));
    }
    let a = (k / 2.0).exp_m1();
    let disc = 1.0 - a * a;
    if disc > 0.0 {
        Ok(4.0 * a * a / (k * k * (1.0 + disc.sqrt())))
    } else {
        Ok(2.0 * a * a / (k * k))
    }
}

/// A_k = [K/2 + (2 pi^2 / K)(k + 1/2)^2]^{-1}.
pub fn einstein_a(kk: f64, k: usize) -> f64 {
    let m = k as f64 + 0.5;
    2.0 * kk / (kk * kk + 4.0 * PI * PI * m * m)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EinsteinConstant {
    pub value: f64,
    pub sum_abs_a: f64,
    /// Bound on the error of sum |A_k| from truncation (after the tail estimate).
    pub tail_error: f64,
    pub relative_truncation_error: f64,
    pub terms: usize,
}

/// The log-Sobolev constant for Einstein manifolds with Ric = -K.
pub fn einstein_lsi_constant(kk: f64, d: usize, truncation: usize) -> Result<EinsteinConstant> {
    if truncation < 1000 {
        return Err(Error::Config(format!("truncation {truncation} below 1000 terms")));
    }
    if !kk.is_finite() {
        return Err(Error::Domain("K must be finite".into()));
    }
    let b = (2.0 * PI / (kk * kk + PI * PI)).max(1.0 / PI);
    if kk == 0.0 {
        return Ok(EinsteinConstant {
            value: b * b,
            sum_abs_a: 0.0,
            tail_error: 0.0,
            relative_truncation_error: 0.0,
            terms: 0,
        });
    }
    let mut sum = 0.0;
    for k in (0..truncation).rev() {
        sum += einstein_a(kk, k).abs();
    }
    // |A_x| is decreasing in x, so the tail lies between the integrals from N and from N - 1,
    // with int_a^inf |A_x| dx = atan(|K| / (2 pi (a + 1/2))) / pi.
    let tail_int = |a: f64| (kk.abs() / (2.0 * PI * (a + 0.5))).atan() / PI;
    let n = truncation as f64;
    let (lo, hi) = (tail_int(n), tail_int(n - 1.0));
    sum += 0.5 * (lo + hi);
    let tail_error = 0.5 * (hi - lo);
    let growth = if kk.abs() < TAYLOR_CUTOFF { 1.0 + kk / 2.0 + kk * kk / 6.0 } else { kk.exp_m1() / kk };
    let a0 = einstein_a(kk, 0);
    let bracket = 4.0 * d as f64 * sum * sum * growth + 2.0 * a0 * a0;
    let value = (bracket.sqrt() + b).powi(2);
    Ok(EinsteinConstant {
        value,
        sum_abs_a: sum,
        tail_error,
        relative_truncation_error: tail_error / sum,
        terms: truncation,
    })
}

/// (C_1(K), C_{2,n}(K)) on the horizon [0, T].
pub fn path_space_constants(k: f64, t: f64, n: usize) -> Result<(f64, f64)> {
    if !(t > 0.0) || n == 0 {
        return Err(Error::Domain(format!("need T > 0 and n >= 1, got T = {t}, n = {n}")));
    }
    let x = k * t;
    let (bracket, growth) = if k.abs() < TAYLOR_CUTOFF {
        (t * t * (0.5 + x / 3.0 + x * x / 8.0), t * (1.0 + x / 2.0 + x * x / 6.0))
    } else {
        ((x * x.exp_m1() - (x.exp_m1() - x)) / (k * k), x.exp_m1() / k)
    };
    let c1 = bracket.max(t * t / 2.0);
    let c2 = growth * (-k / n as f64).exp().max(1.0);
    Ok((c1, c2))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantReport {
    pub k: f64,
    pub d: usize,
    pub t: f64,
    pub n: usize,
    pub c: f64,
    pub c0: f64,
    /// None at K = 0 where the Gourcy-Wu formula is undefined.
    pub c_tilde: Option<f64>,
    pub c_einstein: f64,
    pub einstein_truncation_error: f64,
    pub c1: f64,
    pub c2n: f64,
    pub branch: String,
}

pub fn constant_report(k: f64, d: usize, t: f64, n: usize, truncation: usize) -> Result<ConstantReport> {
    let e = einstein_lsi_constant(k, d, truncation)?;
    let (c1, c2n) = path_space_constants(k, t, n)?;
    let branch = if k.abs() < TAYLOR_CUTOFF {
        "taylor"
    } else if first_term_direct(k) <= c0_direct(k) {
        "first_term"
    } else {
        "c0"
    };
    Ok(ConstantReport {
        k,
        d,
        t,
        n,
        c: lsi_constant(k),
        c0: c0(k),
        c_tilde: gourcy_wu_constant(k).ok(),
        c_einstein: e.value,
        einstein_truncation_error: e.relative_truncation_error,
        c1,
        c2n,
        branch: branch.into(),
    })
}

/// Solves dM/dt = -(1/2) M Ric_t, M_0 = I, by RK4 on the sample grid; Ric is linearly
/// interpolated between samples. Returns M at every grid time.
pub fn ricci_flow_matrix(ric: &[DMatrix<f64>], times: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    if ric.len() != times.len() || ric.is_empty() {
        return Err(Error::Config("need one Ricci sample per grid time".into()));
    }
    let d = ric[0].nrows();
    let mut out = Vec::with_capacity(times.len());
    let mut m = DMatrix::identity(d, d);
    out.push(m.clone());
    let rhs = |m: &DMatrix<f64>, r: &DMatrix<f64>| -0.5 * m * r;
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let r0 = &ric[k - 1];
        let r1 = &ric[k];
        let rm = (r0 + r1) * 0.5;
        let k1 = rhs(&m, r0);
        let k2 = rhs(&(&m + &k1 * (h / 2.0)), &rm);
        let k3 = rhs(&(&m + &k2 * (h / 2.0)), &rm);
        let k4 = rhs(&(&m + &k3 * h), r1);
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(m.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowBound {
    /// max over s < tau of ||M_s^{-1} M_tau|| - e^{K(tau - s)/2}.
    pub worst_slack: f64,
    pub pairs: usize,
}

/// Checks ||M_s^{-1} M_tau|| <= e^{K(tau - s)/2} over all grid pairs.
pub fn flow_bound(ms: &[DMatrix<f64>], times: &[f64], k: f64) -> Result<FlowBound> {
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    for s in 0..ms.len() {
        let inv = ms[s].clone().try_inverse().ok_or(Error::Degenerate(s))?;
        for tau in s + 1..ms.len() {
            let norm = (&inv * &ms[tau]).singular_values().max();
            worst = worst.max(norm - (k * (times[tau] - times[s]) / 2.0).exp());
            pairs += 1;
        }
    }
    Ok(FlowBound { worst_slack: worst, pairs })
}

/// Ric_{U_s} in frame coordinates along a frame path.
pub fn ricci_samples(m: &Manifold, frames: &[crate::geometry::Frame]) -> Vec<DMatrix<f64>> {
    frames
        .iter()
        .map(|u| {
            let mut r = DMatrix::zeros(m.dim, m.dim);
            for a in 0..m.dim {
                let ric = m.ricci_with_frame(u, &u.cols.column(a).into_owned());
                r.set_column(a, &m.frame_coords(u, &ric));
            }
            r
        })
        .collect()
}

/// Smooth test functions on M, given through ambient coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointFunction {
    /// f(x) = x^axis.
    Coord { axis: usize },
    /// f(x) = cos(freq x^axis).
    CosCoord { axis: usize, freq: f64 },
}

impl PointFunction {
    pub fn value(&self, x: &Point) -> f64 {
        match self {
            PointFunction::Coord { axis } => x[*axis],
            PointFunction::CosCoord { axis, freq } => (freq * x[*axis]).cos(),
        }
    }

    pub fn gradient(&self, m: &Manifold, x: &Point) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        match self {
            PointFunction::Coord { axis } => g[*axis] = 1.0,
            PointFunction::CosCoord { axis, freq } => g[*axis] = -freq * (freq * x[*axis]).sin(),
        }
        m.riemannian_gradient(x, &g)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradIneqReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Change of the margin when the spatial and time quadrature orders are doubled.
    pub quadrature_error: f64,
    pub k: f64,
}

/// Ricci lower-bound constant K with Ric >= -K.
pub fn ricci_lower_bound(m: &Manifold) -> f64 {
    0.0 - m.ricci_constant()
}

fn semigroup(m: &Manifold, s: f64, y: &Point, f: &dyn Fn(&Point) -> f64, order: usize) -> Result<f64> {
    match m.kind {
        ManifoldKind::Euclidean => {
            let gh = GaussHermite::new(NonZeroUsize::new(order).expect("positive order"));
            let nodes: Vec<(f64, f64)> = gh.as_node_weight_pairs().to_vec();
            let d = m.dim;
            let mut idx = vec![0usize; d];
            let mut total = 0.0;
            loop {
                let mut x = y.clone();
                let mut w = 1.0;
                for a in 0..d {
                    let (node, weight) = nodes[idx[a]];
                    x[a] += (2.0 * s).sqrt() * node;
                    w *= weight / PI.sqrt();
                }
                total += w * f(&x);
                let mut a = 0;
                while a < d {
                    idx[a] += 1;
                    if idx[a] < nodes.len() {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
                if a == d {
                    break;
                }
            }
            Ok(total)
        }
        _ => heat_kernel_expectation(m, y, s, f, order),
    }
}

fn grad_ineq_at(m: &Manifold, f: &PointFunction, t1: f64, t2: f64, y: &Point, space: usize, time: usize) -> Result<(f64, f64)> {
    let k = ricci_lower_bound(m);
    let u = m.reference_frame(y);
    let step = 1e-4;
    let gl = GaussLegendre::new(NonZeroUsize::new(time).expect("positive order"));
    let (a, b) = (t2.min(t1), t2.max(t1));
    let half = 0.5 * (b - a);
    let fv = |x: &Point| f.value(x);
    let gn = |x: &Point| m.norm(&f.gradient(m, x));
    let mut grad: DVector<f64> = DVector::zeros(m.dim);
    let mut rhs = 0.0;
    for &(node, w) in gl.as_node_weight_pairs() {
        let s = a + half * (node + 1.0);
        for c in 0..m.dim {
            let e = u.cols.column(c).into_owned() * step;
            let plus = semigroup(m, s, &m.exp(y, &e), &fv, space)?;
            let minus = semigroup(m, s, &m.exp(y, &(-e)), &fv, space)?;
            grad[c] += half * w * (plus - minus) / (2.0 * step);
        }
        rhs += half * w * (k * s / 2.0).exp() * semigroup(m, s, y, &gn, space)?;
    }
    Ok((grad.norm(), rhs))
}

/// |int_{T2}^{T1} grad p_s f(y) ds| against int_{T2}^{T1} e^{Ks/2} p_s|grad f|(y) ds.
pub fn gradient_ineq_check(m: &Manifold, f: &PointFunction, t1: f64, t2: f64, y: &Point) -> Result<GradIneqReport> {
    match (m.kind, m.dim) {
        (ManifoldKind::Sphere, 2) | (ManifoldKind::Torus, 1) | (ManifoldKind::Euclidean, 1..=3) => {}
        _ => return Err(Error::Unsupported(format!("semigroup quadrature on {:?} of dimension {}", m.kind, m.dim))),
    }
    if t1 == t2 {
        return Ok(GradIneqReport { lhs: 0.0, rhs: 0.0, margin: 0.0, quadrature_error: 0.0, k: ricci_lower_bound(m) });
    }
    if t1.min(t2) <= 0.0 {
        return Err(Error::Domain("semigroup times must be positive".into()));
    }
    let (lhs, rhs) = grad_ineq_at(m, f, t1, t2, y, 48, 12)?;
    let (lhs2, rhs2) = grad_ineq_at(m, f, t1, t2, y, 96, 24)?;
    let quadrature_error = ((rhs2 - lhs2) - (rhs - lhs)).abs() + 1e-12;
    Ok(GradIneqReport { lhs: lhs2, rhs: rhs2, margin: rhs2 - lhs2, quadrature_error, k: ricci_lower_bound(m) })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LsiReport {
    pub k: f64,
    pub c: f64,
    /// mu(F^2 log F^2) after normalizing mu(F^2) = 1.
    pub entropy: f64,
    /// (1/2) mu(|DF|^2) after the same normalization.
    pub energy: f64,
    pub two_c_energy: f64,
    /// 2 C(K) energy - entropy.
    pub slack: f64,
    /// 2 C(K) mu(|DF|^2) - entropy, the slack with the energy taken without the factor 1/2.
    pub slack_unhalved: f64,
    /// Batch-means standard errors of the two slacks.
    pub stderr: f64,
    pub stderr_unhalved: f64,
    pub samples: usize,
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Empirical log-Sobolev slack over Brownian paths on the n-grid.
pub fn lsi_empirical(
    m: &Manifold,
    f: &CylinderFunction,
    n: usize,
    substeps: usize,
    samples: usize,
    seed: u64,
) -> Result<LsiReport> {
    let part = Partition::new(n)?;
    let origin = m.origin();
    let frame0 = m.reference_frame(&origin);
    let draws: Result<Vec<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            let (path, _) = brownian_path_sample(m, &origin, part, m.inj_radius, substeps, &mut rng)?;
            let frames = horizontal_lift(m, &path, &frame0)?;
            let fv = eval_cylinder(m, f, &path)?;
            let e: f64 = energy_summands(m, f, &path, &frames)?.iter().sum();
            Ok((fv, e))
        })
        .collect();
    let draws = draws?;
    let k = ricci_lower_bound(m);
    let c = lsi_constant(k);
    let summarize = |d: &[(f64, f64)]| {
        let nf = d.len() as f64;
        let f2 = d.iter().map(|x| x.0 * x.0).sum::<f64>() / nf;
        let ent = d.iter().map(|x| xlogx(x.0 * x.0 / f2)).sum::<f64>() / nf;
        let en = d.iter().map(|x| x.1).sum::<f64>() / nf / f2;
        (ent, en)
    };
    let (entropy, energy) = summarize(&draws);
    let batches = 20;
    let size = draws.len() / batches;
    let batch: Vec<(f64, f64)> = (0..batches).map(|b| summarize(&draws[b * size..(b + 1) * size])).collect();
    let halved: Vec<f64> = batch.iter().map(|(e, en)| 2.0 * c * en - e).collect();
    let unhalved: Vec<f64> = batch.iter().map(|(e, en)| 4.0 * c * en - e).collect();
    let stderr = mean_stderr(&halved).1;
    let stderr_unhalved = mean_stderr(&unhalved).1;
    Ok(LsiReport {
        k,
        c,
        entropy,
        energy,
        two_c_energy: 2.0 * c * energy,
        slack: 2.0 * c * energy - entropy,
        slack_unhalved: 4.0 * c * energy - entropy,
        stderr,
        stderr_unhalved,
        samples,
    })
}
