//! Constant-curvature Riemannian manifolds in ambient coordinates.
//!
//! Spheres live in R^{d+1}, hyperbolic spaces in the Minkowski model of
//! R^{1,d} (time coordinate first), tori as vectors of angles. Geodesics,
//! logarithms and parallel transport are closed form.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = DVector<f64>;
pub type Tangent = DVector<f64>;

/// Manifold description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Euclidean {
        dim: usize,
    },
    Circle {
        #[serde(default = "two_pi")]
        circumference: f64,
    },
    Torus {
        periods: Vec<f64>,
    },
    Sphere {
        dim: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Hyperbolic {
        dim: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Euclidean,
    Torus,
    Sphere,
    Hyperbolic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub spec: ManifoldSpec,
    pub kind: ManifoldKind,
    pub dim: usize,
    pub radius: f64,
    pub periods: Vec<f64>,
    /// Sectional curvature.
    pub curvature: f64,
    /// Bound on the operator norm of the curvature form over unit arguments.
    pub kappa0: f64,
    pub inj_radius: f64,
}

/// Orthonormal frame at `base`; the columns are ambient tangent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub base: Point,
    pub cols: DMatrix<f64>,
}

impl Frame {
    /// u a: the tangent vector with frame coordinates `a`.
    pub fn apply(&self, a: &DVector<f64>) -> Tangent {
        &self.cols * a
    }
}

impl Manifold {
    pub fn from_spec(spec: &ManifoldSpec) -> Result<Self> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let (kind, dim, radius, periods, curvature, inj) = match spec {
            ManifoldSpec::Euclidean { dim } => {
                if *dim == 0 {
                    return bad("manifold.dim must be positive");
                }
                (ManifoldKind::Euclidean, *dim, f64::INFINITY, vec![], 0.0, f64::INFINITY)
            }
            ManifoldSpec::Circle { circumference } => {
                if !(*circumference > 0.0 && circumference.is_finite()) {
                    return bad("manifold.circumference must be positive");
                }
                let l = *circumference;
                (ManifoldKind::Torus, 1, f64::INFINITY, vec![l], 0.0, l / 2.0)
            }
            ManifoldSpec::Torus { periods } => {
                if periods.is_empty() || periods.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return bad("manifold.periods must be a non-empty list of positive numbers");
                }
                let inj = periods.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
                (ManifoldKind::Torus, periods.len(), f64::INFINITY, periods.clone(), 0.0, inj)
            }
            ManifoldSpec::Sphere { dim, radius } => {
                if *dim == 0 {
                    return bad("manifold.dim must be positive");
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("manifold.radius must be positive");
                }
                let k = 1.0 / (radius * radius);
                (ManifoldKind::Sphere, *dim, *radius, vec![], k, PI * radius)
            }
            ManifoldSpec::Hyperbolic { dim, radius } => {
                if *dim == 0 {
                    return bad("manifold.dim must be positive");
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("manifold.radius must be positive");
                }
                let k = -1.0 / (radius * radius);
                (ManifoldKind::Hyperbolic, *dim, *radius, vec![], k, f64::INFINITY)
            }
        };
        // Curvature is zero on one-dimensional manifolds whatever the embedding.
        let curvature = if dim == 1 { 0.0 } else { curvature };
        Ok(Self {
            spec: spec.clone(),
            kind,
            dim,
            radius,
            periods,
            curvature,
            kappa0: curvature.abs(),
            inj_radius: inj,
        })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::from_spec(&ManifoldSpec::Euclidean { dim }).expect("valid spec")
    }

    pub fn circle(circumference: f64) -> Self {
        Self::from_spec(&ManifoldSpec::Circle { circumference }).expect("valid spec")
    }

    pub fn torus(periods: Vec<f64>) -> Self {
        Self::from_spec(&ManifoldSpec::Torus { periods }).expect("valid spec")
    }

    pub fn sphere(dim: usize, radius: f64) -> Self {
        Self::from_spec(&ManifoldSpec::Sphere { dim, radius }).expect("valid spec")
    }

    pub fn hyperbolic(dim: usize, radius: f64) -> Self {
        Self::from_spec(&ManifoldSpec::Hyperbolic { dim, radius }).expect("valid spec")
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => self.dim,
            ManifoldKind::Sphere | ManifoldKind::Hyperbolic => self.dim + 1,
        }
    }

    fn check_same(&self, p: &Point) -> Result<()> {
        if p.len() != self.ambient_dim() {
            return Err(Error::Domain(format!(
                "point has {} coordinates, manifold expects {}",
                p.len(),
                self.ambient_dim()
            )));
        }
        Ok(())
    }

    /// Metric inner product of two ambient tangent vectors.
    pub fn inner(&self, v: &Tangent, w: &Tangent) -> f64 {
        match self.kind {
            ManifoldKind::Hyperbolic => minkowski(v, w),
            _ => v.dot(w),
        }
    }

    pub fn norm(&self, v: &Tangent) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Residual of the defining constraint.
    pub fn constraint_residual(&self, p: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => 0.0,
            ManifoldKind::Sphere => (p.norm() - self.radius).abs(),
            ManifoldKind::Hyperbolic => {
                let r = (-minkowski(p, p)).max(0.0).sqrt();
                (r - self.radius).abs() + if p[0] > 0.0 { 0.0 } else { 1.0 }
            }
        }
    }

    pub fn check_point(&self, p: &Point, tol: f64) -> Result<()> {
        self.check_same(p)?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("point has non-finite coordinates".into()));
        }
        let scale = if self.radius.is_finite() { self.radius.max(1.0) } else { 1.0 };
        let res = self.constraint_residual(p);
        if res > tol * scale {
            return Err(Error::Domain(format!("point violates the manifold constraint by {res:e}")));
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient vector onto T_p M.
    pub fn project_tangent(&self, p: &Point, v: &DVector<f64>) -> Tangent {
        let r2 = self.radius * self.radius;
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => v.clone(),
            ManifoldKind::Sphere => v - p * (p.dot(v) / r2),
            ManifoldKind::Hyperbolic => v + p * (minkowski(p, v) / r2),
        }
    }

    /// Map a point back onto the manifold (normalization / angle wrapping).
    pub fn normalize(&self, p: &Point) -> Point {
        match self.kind {
            ManifoldKind::Euclidean => p.clone(),
            ManifoldKind::Torus => {
                DVector::from_iterator(p.len(), p.iter().zip(&self.periods).map(|(x, l)| x.rem_euclid(*l)))
            }
            ManifoldKind::Sphere => p * (self.radius / p.norm()),
            ManifoldKind::Hyperbolic => {
                let s = (-minkowski(p, p)).sqrt();
                p * (self.radius / s)
            }
        }
    }

    pub fn exp(&self, p: &Point, v: &Tangent) -> Point {
        match self.kind {
            ManifoldKind::Euclidean => p + v,
            ManifoldKind::Torus => self.normalize(&(p + v)),
            ManifoldKind::Sphere => {
                let th = v.norm() / self.radius;
                let q = p * th.cos() + v * sinc(th);
                self.normalize(&q)
            }
            ManifoldKind::Hyperbolic => {
                let th = self.norm(v) / self.radius;
                let q = p * th.cosh() + v * sinhc(th);
                self.normalize(&q)
            }
        }
    }

    /// Wrapped coordinate difference on a torus, in [-L/2, L/2).
    fn torus_diff(&self, p: &Point, q: &Point) -> DVector<f64> {
        DVector::from_iterator(
            p.len(),
            p.iter().zip(q.iter()).zip(&self.periods).map(|((a, b), l)| {
                let d = (b - a).rem_euclid(*l);
                if d >= l / 2.0 {
                    d - l
                } else {
                    d
                }
            }),
        )
    }

    /// Unnormalized geodesic direction from p towards q and the angle/length.
    fn log_parts(&self, p: &Point, q: &Point) -> (DVector<f64>, f64) {
        match self.kind {
            ManifoldKind::Euclidean => {
                let d = q - p;
                let n = d.norm();
                (d, n)
            }
            ManifoldKind::Torus => {
                let d = self.torus_diff(p, q);
                let n = d.norm();
                (d, n)
            }
            ManifoldKind::Sphere => {
                let r2 = self.radius * self.radius;
                let c = p.dot(q) / r2;
                let w = q - p * c;
                let s = w.norm() / self.radius;
                let th = s.atan2(c);
                (w, self.radius * th)
            }
            ManifoldKind::Hyperbolic => {
                let r2 = self.radius * self.radius;
                let c = -minkowski(p, q) / r2;
                let w = q - p * c;
                let s = self.norm(&w) / self.radius;
                let th = s.asinh();
                (w, self.radius * th)
            }
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_same(p)?;
        self.check_same(q)?;
        Ok(self.log_parts(p, q).1)
    }

    /// Riemannian distance without dimension checks (hot loops).
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        self.log_parts(p, q).1
    }

    pub fn log(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_same(p)?;
        self.check_same(q)?;
        let (w, dist) = self.log_parts(p, q);
        if !(dist < self.inj_radius * (1.0 - 1e-12)) {
            return Err(Error::CutLocus { dist, inj: self.inj_radius });
        }
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => Ok(w),
            _ => {
                let nw = self.norm(&w);
                if nw == 0.0 {
                    Ok(DVector::zeros(p.len()))
                } else {
                    Ok(w * (dist / nw))
                }
            }
        }
    }

    /// Parallel transport of v from T_p M to T_q M along the minimizing geodesic.
    pub fn transport(&self, p: &Point, q: &Point, v: &Tangent) -> Result<Tangent> {
        let dist = self.distance(p, q)?;
        if !(dist < self.inj_radius * (1.0 - 1e-12)) {
            return Err(Error::CutLocus { dist, inj: self.inj_radius });
        }
        let r2 = self.radius * self.radius;
        Ok(match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => v.clone(),
            ManifoldKind::Sphere => {
                let c = q.dot(v) / (r2 + p.dot(q));
                v - (p + q) * c
            }
            ManifoldKind::Hyperbolic => {
                let c = minkowski(q, v) / (r2 - minkowski(p, q));
                v + (p + q) * c
            }
        })
    }

    pub fn transport_frame(&self, u: &Frame, q: &Point) -> Result<Frame> {
        let mut cols = u.cols.clone();
        for k in 0..self.dim {
            let v = self.transport(&u.base, q, &u.cols.column(k).into_owned())?;
            cols.set_column(k, &v);
        }
        Ok(Frame { base: q.clone(), cols })
    }

    /// Frame coordinates u^{-1} v.
    pub fn frame_coords(&self, u: &Frame, v: &Tangent) -> DVector<f64> {
        DVector::from_iterator(self.dim, (0..self.dim).map(|k| self.inner(&u.cols.column(k).into_owned(), v)))
    }

    /// Largest deviation of the Gram matrix of the frame from the identity.
    pub fn frame_orthonormality_error(&self, u: &Frame) -> f64 {
        let mut err: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let g = self.inner(&u.cols.column(a).into_owned(), &u.cols.column(b).into_owned());
                let target = if a == b { 1.0 } else { 0.0 };
                err = err.max((g - target).abs());
            }
        }
        err
    }

    /// Gram-Schmidt orthonormalization of the frame columns, in place.
    pub fn reorthonormalize(&self, u: &mut Frame) {
        let mut done: Vec<DVector<f64>> = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let mut v = self.project_tangent(&u.base, &u.cols.column(k).into_owned());
            for w in &done {
                v -= w * self.inner(w, &v);
            }
            let n = self.norm(&v);
            v /= n;
            u.cols.set_column(k, &v);
            done.push(v);
        }
    }

    /// Default base point: origin, north pole R e_last, or hyperboloid apex.
    pub fn origin(&self) -> Point {
        let m = self.ambient_dim();
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => DVector::zeros(m),
            ManifoldKind::Sphere => {
                let mut p = DVector::zeros(m);
                p[m - 1] = self.radius;
                p
            }
            ManifoldKind::Hyperbolic => {
                let mut p = DVector::zeros(m);
                p[0] = self.radius;
                p
            }
        }
    }

    /// Orthonormal frame at p obtained by Gram-Schmidt on the ambient basis.
    pub fn reference_frame(&self, p: &Point) -> Frame {
        let m = self.ambient_dim();
        let order: Vec<usize> = match self.kind {
            ManifoldKind::Hyperbolic => (1..m).chain(std::iter::once(0)).collect(),
            _ => (0..m).collect(),
        };
        let mut done: Vec<DVector<f64>> = Vec::with_capacity(self.dim);
        for k in order {
            if done.len() == self.dim {
                break;
            }
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            let mut v = self.project_tangent(p, &e);
            for w in &done {
                v -= w * self.inner(w, &v);
            }
            let n = self.norm(&v);
            if n > 1e-6 {
                done.push(v / n);
            }
        }
        let cols = DMatrix::from_columns(&done);
        Frame { base: p.clone(), cols }
    }

    /// The frame u g for an orthogonal d x d matrix g.
    pub fn rotate_frame(&self, u: &Frame, g: &DMatrix<f64>) -> Frame {
        Frame { base: u.base.clone(), cols: &u.cols * g }
    }

    /// Whether Omega_u depends on the point or frame; false for every shipped instance.
    pub fn curvature_varies(&self) -> bool {
        false
    }

    /// Curvature form Omega_u(a, b) as a d x d matrix acting on frame coordinates:
    /// Omega_u(a,b)c = u^{-1} R(ua, ub)(uc) with R(X,Y)Z = k(<Y,Z>X - <X,Z>Y).
    pub fn curvature_op(&self, _u: &Frame, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
        (a * b.transpose() - b * a.transpose()) * self.curvature
    }

    /// Riemann tensor R(x, y)z on ambient tangent vectors at p.
    pub fn riemann(&self, _p: &Point, x: &Tangent, y: &Tangent, z: &Tangent) -> Tangent {
        (x * self.inner(y, z) - y * self.inner(x, z)) * self.curvature
    }

    /// Ric(v) = sum_i R(v, e_i) e_i over the orthonormal frame u at p.
    pub fn ricci_with_frame(&self, u: &Frame, v: &Tangent) -> Tangent {
        let mut out = DVector::zeros(v.len());
        for i in 0..self.dim {
            let e = u.cols.column(i).into_owned();
            out += self.riemann(&u.base, v, &e, &e);
        }
        out
    }

    pub fn ricci(&self, p: &Point, v: &Tangent) -> Tangent {
        self.ricci_with_frame(&self.reference_frame(p), v)
    }

    pub fn scalar_curvature_with_frame(&self, u: &Frame) -> f64 {
        (0..self.dim)
            .map(|i| {
                let e = u.cols.column(i).into_owned();
                self.inner(&self.ricci_with_frame(u, &e), &e)
            })
            .sum()
    }

    pub fn scalar_curvature(&self, p: &Point) -> f64 {
        self.scalar_curvature_with_frame(&self.reference_frame(p))
    }

    /// Gradient of the scalar curvature; zero on every constant-curvature instance.
    pub fn grad_scalar(&self, p: &Point) -> Tangent {
        DVector::zeros(p.len())
    }

    /// Ricci curvature as a constant: Ric = ricci_constant * g.
    pub fn ricci_constant(&self) -> f64 {
        (self.dim as f64 - 1.0) * self.curvature
    }

    /// Riemannian gradient from an ambient (Euclidean) gradient.
    pub fn riemannian_gradient(&self, p: &Point, ambient_grad: &DVector<f64>) -> Tangent {
        match self.kind {
            ManifoldKind::Hyperbolic => {
                let mut g = ambient_grad.clone();
                g[0] = -g[0];
                self.project_tangent(p, &g)
            }
            _ => self.project_tangent(p, ambient_grad),
        }
    }

    /// Jacobian of exp_p at a tangent vector of length r (volume density in normal coordinates).
    pub fn exp_jacobian(&self, r: f64) -> f64 {
        let k = self.dim as i32 - 1;
        match self.kind {
            ManifoldKind::Euclidean | ManifoldKind::Torus => 1.0,
            ManifoldKind::Sphere => sinc(r / self.radius).powi(k),
            ManifoldKind::Hyperbolic => sinhc(r / self.radius).powi(k),
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let m = self.ambient_dim();
        match self.kind {
            ManifoldKind::Euclidean => DVector::from_fn(m, |_, _| rng.sample(StandardNormal)),
            ManifoldKind::Torus => {
                DVector::from_iterator(m, self.periods.iter().map(|l| rng.random::<f64>() * l))
            }
            ManifoldKind::Sphere => {
                let g: DVector<f64> = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
                self.normalize(&g)
            }
            ManifoldKind::Hyperbolic => {
                let o = self.origin();
                let u = self.reference_frame(&o);
                let a: DVector<f64> = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                self.exp(&o, &(u.apply(&a) * self.radius))
            }
        }
    }

    /// Tangent vector at p with i.i.d. N(0, scale^2) frame coordinates.
    pub fn random_tangent<R: Rng + ?Sized>(&self, p: &Point, scale: f64, rng: &mut R) -> Tangent {
        let u = self.reference_frame(p);
        let a: DVector<f64> = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
        u.apply(&a)
    }

    /// Heat kernel of (1/2) Laplace-Beltrami with respect to the Riemannian volume.
    pub fn heat_kernel(&self, t: f64, p: &Point, q: &Point) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat kernel time must be positive, got {t}")));
        }
        self.check_same(p)?;
        self.check_same(q)?;
        match self.kind {
            ManifoldKind::Euclidean => {
                let r2 = (q - p).norm_squared();
                Ok((2.0 * PI * t).powf(-(self.dim as f64) / 2.0) * (-r2 / (2.0 * t)).exp())
            }
            ManifoldKind::Torus => {
                let d = self.torus_diff(p, q);
                Ok(d.iter().zip(&self.periods).map(|(x, l)| wrapped_gaussian(*x, *l, t)).product())
            }
            ManifoldKind::Sphere => {
                let th = self.dist(p, q) / self.radius;
                if self.dim == 1 {
                    return Ok(wrapped_gaussian(th * self.radius, 2.0 * PI * self.radius, t));
                }
                let tu = t / (self.radius * self.radius);
                Ok(sphere_heat_kernel_unit(self.dim, tu, th.cos()) / self.radius.powi(self.dim as i32))
            }
            ManifoldKind::Hyperbolic => {
                Err(Error::Unsupported("heat kernel on hyperbolic space".into()))
            }
        }
    }
}

pub fn minkowski(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    -v[0] * w[0] + v.rows(1, v.len() - 1).dot(&w.rows(1, w.len() - 1))
}

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// sinh(x)/x with the removable singularity filled in.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sinh() / x
    }
}

/// Heat kernel of (1/2) d^2/dx^2 on a circle of circumference l at offset x.
pub fn wrapped_gaussian(x: f64, l: f64, t: f64) -> f64 {
    if t < l * l / 8.0 {
        // Image sum converges fastest for small times.
        let norm = 1.0 / (2.0 * PI * t).sqrt();
        let mut sum = (-x * x / (2.0 * t)).exp();
        let mut k = 1.0;
        loop {
            let a = x + k * l;
            let b = x - k * l;
            let term = (-a * a / (2.0 * t)).exp() + (-b * b / (2.0 * t)).exp();
            sum += term;
            if term < 1e-18 {
                break;
            }
            k += 1.0;
        }
        norm * sum
    } else {
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let w = 2.0 * PI * k / l;
            let decay = (-w * w * t / 2.0).exp();
            sum += 2.0 * decay * (w * x).cos();
            if decay < 1e-18 {
                break;
            }
            k += 1.0;
        }
        sum / l
    }
}

/// Area of the unit sphere S^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    let mut area = if d.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
    let mut k = if d.is_multiple_of(2) { 0 } else { 1 };
    while k < d {
        k += 2;
        area *= 2.0 * PI / (k as f64 - 1.0);
    }
    area
}

/// Heat kernel of (1/2) Laplacian on the unit S^d (d >= 2) as a function of cos(angle),
/// via the Gegenbauer eigenfunction expansion truncated once terms drop below 1e-14.
pub fn sphere_heat_kernel_unit(d: usize, t: f64, x: f64) -> f64 {
    let alpha = (d as f64 - 1.0) / 2.0;
    let area = unit_sphere_area(d);
    let dm1 = d as f64 - 1.0;
    let x = x.clamp(-1.0, 1.0);
    let mut c_prev = 1.0;
    let mut c_cur = 2.0 * alpha * x;
    let mut c_at_one = 1.0;
    let mut sum = 1.0 / area;
    let mut l = 1usize;
    loop {
        let lf = l as f64;
        c_at_one *= (lf + 2.0 * alpha - 1.0) / lf;
        let coef = (-lf * (lf + dm1) * t / 2.0).exp() * (2.0 * lf + dm1) / dm1 / area;
        sum += coef * c_cur;
        if coef * c_at_one < 1e-14 || l > 1_000_000 {
            break;
        }
        let next = (2.0 * x * (lf + alpha) * c_cur - (lf + 2.0 * alpha - 1.0) * c_prev) / (lf + 1.0);
        c_prev = c_cur;
        c_cur = next;
        l += 1;
    }
    sum
}
