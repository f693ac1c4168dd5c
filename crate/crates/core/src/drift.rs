//! Integration-by-parts drift of the finite-dimensional heat flow.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{Manifold, ManifoldKind, Point, Tangent};
use crate::jacobi::{
    adaptive_gl_matrix, default_delta, jacobi_basis, q_operator, DeltaAdmissibility, IntervalGeodesic,
    JacobiSeries,
};
use crate::pathgrid::{anti_development, horizontal_lift, make_path, AntiDevelopment, DiscretePath, FramePath, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftVariant {
    Full,
    Simple,
}

/// Tangent vectors at x_1..x_n.
#[derive(Clone, Debug)]
pub struct DriftField {
    pub vectors: Vec<Tangent>,
    pub variant: DriftVariant,
    pub eps: f64,
    pub delta: f64,
}

/// The two parts of beta_P(h_{., j}) as d-vectors: the increment jump and the
/// curvature correction.
#[derive(Clone, Debug)]
pub struct BetaParts {
    pub jump: DVector<f64>,
    pub curvature: DVector<f64>,
}

impl BetaParts {
    pub fn total(&self) -> DVector<f64> {
        &self.jump + &self.curvature
    }
}

/// Curvature term sum_{a1} <q_{s_j}(h_{a1,j}) e_{a1}, e_a> for all a at once.
/// Each column a1 integrates Omega(b', h_{a1,j}(r)) e_{a1}; summing the columns
/// is q applied field by field.
fn curvature_term(m: &Manifold, path: &DiscretePath, frames: &FramePath, incs: &AntiDevelopment, j: usize) -> Result<DVector<f64>> {
    let d = m.dim;
    if m.curvature == 0.0 && !m.curvature_varies() {
        return Ok(DVector::zeros(d));
    }
    let eps = path.eps();
    let geo = IntervalGeodesic::new(path, frames, incs, j);
    let bprime = incs.delta_b(j) / eps;
    let a0 = crate::jacobi::a_matrix(m, geo.u0, &bprime);
    let series = JacobiSeries::new(&a0, eps).map_err(|_| crate::error::Error::Degenerate(j))?;
    let scale = 1.0 / eps.sqrt();
    let cols = adaptive_gl_matrix(eps, (d, d), |r| {
        let h = series.value(r) * scale;
        let mut out = DMatrix::zeros(d, d);
        for a1 in 0..d {
            let ha1 = h.column(a1).into_owned();
            let om = geo.omega(m, r, &bprime, &ha1);
            out.set_column(a1, &om.column(a1));
        }
        out
    });
    Ok(DVector::from_iterator(d, (0..d).map(|a| cols.row(a).sum())))
}

pub fn beta_parts(
    m: &Manifold,
    path: &DiscretePath,
    frames: &FramePath,
    incs: &AntiDevelopment,
    j: usize,
) -> Result<BetaParts> {
    let eps = path.eps();
    let jump = (incs.delta_b(j) - incs.delta_b(j + 1)) / eps.powf(1.5);
    let curvature = curvature_term(m, path, frames, incs, j)?;
    Ok(BetaParts { jump, curvature })
}

/// beta_P(h_{a,j}) assembled from the Jacobi basis fields and q_operator, one field at a time.
pub fn beta_coefficient(
    m: &Manifold,
    path: &DiscretePath,
    frames: &FramePath,
    a: usize,
    j: usize,
) -> Result<f64> {
    DeltaAdmissibility::new(m.kappa0, path.delta).require()?;
    let incs = anti_development(m, path, frames)?;
    let eps = path.eps();
    let mut ea = DVector::zeros(m.dim);
    ea[a] = 1.0 / eps.sqrt();
    let mut beta = (incs.delta_b(j) - incs.delta_b(j + 1)).dot(&ea) / eps;
    for a1 in 0..m.dim {
        let h = jacobi_basis(m, path, frames, &incs, a1, j)?;
        let q = q_operator(m, path, frames, &incs, &h, j)?;
        let h_end = h.value(eps);
        beta += eps * (q * h_end).dot(&ea);
    }
    Ok(beta)
}

/// All beta parts j = 1..n for an admissible path.
pub fn beta_all(m: &Manifold, path: &DiscretePath, frames: &FramePath) -> Result<Vec<BetaParts>> {
    DeltaAdmissibility::new(m.kappa0, path.delta).require()?;
    let incs = anti_development(m, path, frames)?;
    (1..=path.n()).map(|j| beta_parts(m, path, frames, &incs, j)).collect()
}

/// X^{beta_P}(s_i) = (1 / (2 sqrt(eps))) sum_a beta_P(h_{a,i}) u(s_i) e_a.
pub fn drift_field_full(m: &Manifold, path: &DiscretePath, frames: &FramePath) -> Result<DriftField> {
    let parts = beta_all(m, path, frames)?;
    let c = 1.0 / (2.0 * path.eps().sqrt());
    let vectors = parts
        .iter()
        .enumerate()
        .map(|(k, p)| frames.frames[k + 1].apply(&p.total()) * c)
        .collect();
    Ok(DriftField { vectors, variant: DriftVariant::Full, eps: path.eps(), delta: path.delta })
}

/// X^{beta_P^0}(s_i) = (gamma'(s_i-) - gamma'(s_i+)) / (2 eps), from logarithms at x_i.
pub fn drift_field_simple(m: &Manifold, path: &DiscretePath) -> Result<DriftField> {
    let eps = path.eps();
    let n = path.n();
    let mut vectors = Vec::with_capacity(n);
    for i in 1..=n {
        let x = path.point(i);
        let mut v = m.log(x, path.point(i - 1))?;
        if i < n {
            v += m.log(x, path.point(i + 1))?;
        }
        vectors.push(v * (-1.0 / (2.0 * eps * eps)));
    }
    Ok(DriftField { vectors, variant: DriftVariant::Simple, eps, delta: path.delta })
}

/// Analytic smooth test paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothPath {
    /// Great circle through the origin in the direction of the first reference frame vector.
    GreatCircle { speed: f64 },
    /// Circle of constant polar angle on a 2-sphere, starting on the (x, z) half plane.
    Latitude { polar: f64, speed: f64 },
    /// Straight line o + s v in Euclidean space.
    Line { direction: Vec<f64> },
    /// x(s) = amplitude sin(pi s) e_axis in Euclidean space.
    FlatSine { axis: usize, amplitude: f64 },
    /// gamma(s) = origin.
    Constant,
}

impl SmoothPath {
    /// (position, velocity, ambient acceleration) at s.
    pub fn jet(&self, m: &Manifold, s: f64) -> (Point, DVector<f64>, DVector<f64>) {
        let amb = m.ambient_dim();
        let o = m.origin();
        match self {
            SmoothPath::GreatCircle { speed } => {
                let r = m.radius;
                let e = m.reference_frame(&o).cols.column(0).into_owned();
                let w = speed / r;
                let (sn, cs) = (w * s).sin_cos();
                let pos = &o * cs + &e * (r * sn);
                let vel = (&o * (-sn) + &e * cs) * (r * w);
                let acc = &pos * (-w * w);
                (pos, vel, acc)
            }
            SmoothPath::Latitude { polar, speed } => {
                let r = m.radius;
                let rho = r * polar.sin();
                let w = speed / rho;
                let (sn, cs) = (w * s).sin_cos();
                let mut pos = DVector::zeros(amb);
                let mut vel = DVector::zeros(amb);
                let mut acc = DVector::zeros(amb);
                pos[0] = rho * cs;
                pos[1] = rho * sn;
                pos[amb - 1] = r * polar.cos();
                vel[0] = -rho * w * sn;
                vel[1] = rho * w * cs;
                acc[0] = -rho * w * w * cs;
                acc[1] = -rho * w * w * sn;
                (pos, vel, acc)
            }
            SmoothPath::Line { direction } => {
                let v = DVector::from_column_slice(direction);
                (&o + &v * s, v, DVector::zeros(amb))
            }
            SmoothPath::FlatSine { axis, amplitude } => {
                let mut pos = o.clone();
                let mut vel = DVector::zeros(amb);
                let mut acc = DVector::zeros(amb);
                let pi = std::f64::consts::PI;
                pos[*axis] += amplitude * (pi * s).sin();
                vel[*axis] = amplitude * pi * (pi * s).cos();
                acc[*axis] = -amplitude * pi * pi * (pi * s).sin();
                (pos, vel, acc)
            }
            SmoothPath::Constant => (o, DVector::zeros(amb), DVector::zeros(amb)),
        }
    }

    /// Grid path gamma(s_i), i = 0..n, with the given delta.
    pub fn sample(&self, m: &Manifold, n: usize, delta: f64) -> Result<DiscretePath> {
        let part = Partition::new(n)?;
        let origin = self.jet(m, 0.0).0;
        let points = (1..=n).map(|i| self.jet(m, part.time(i)).0).collect();
        make_path(m, origin, points, part, delta)
    }
}

/// -(1/2) D_s gamma' + (1/4) Ric(gamma') - (1/12) grad Scal at gamma(s).
pub fn continuum_drift(m: &Manifold, path: &SmoothPath, s: f64) -> Tangent {
    let (pos, vel, acc) = path.jet(m, s);
    let cov_acc = match m.kind {
        ManifoldKind::Euclidean | ManifoldKind::Torus => acc,
        _ => m.project_tangent(&pos, &acc),
    };
    let ric = m.ricci(&pos, &vel);
    cov_acc * -0.5 + ric * 0.25 - m.grad_scalar(&pos) / 12.0
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftStudyRow {
    pub n: usize,
    pub eps: f64,
    pub sup_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftStudy {
    pub rows: Vec<DriftStudyRow>,
    /// Least-squares slope of log(sup_error) against log(eps).
    pub slope: f64,
}

/// Sup over interior grid points 1..n-1 of |X^{beta_P}(s_i) - continuum drift(s_i)|.
/// The endpoint s_n carries the Delta_{n+1} b = 0 boundary term and is excluded.
pub fn drift_limit_study(m: &Manifold, path: &SmoothPath, ns: &[usize]) -> Result<DriftStudy> {
    let delta = default_delta(m);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let grid = path.sample(m, n, delta)?;
        let frames = horizontal_lift(m, &grid, &m.reference_frame(&grid.origin))?;
        let drift = drift_field_full(m, &grid, &frames)?;
        let mut sup: f64 = 0.0;
        for i in 1..n {
            let target = continuum_drift(m, path, grid.partition.time(i));
            sup = sup.max(m.norm(&(&drift.vectors[i - 1] - target)));
        }
        rows.push(DriftStudyRow { n, eps: 1.0 / n as f64, sup_error: sup });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_error.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = if rows.iter().all(|r| r.sup_error == 0.0) { f64::NAN } else { crate::stats::ls_slope(&xs, &ys) };
    Ok(DriftStudy { rows, slope })
}
