//! Orthonormal Jacobi-field basis h_{a,i} of the tangent space of H_P(M).
//!
//! On an interval the field solves h'' = A h with A = Omega_u(b', .)b' and
//! boundary values h(s_{i-1}) = 0, h(s_i) = e_a / sqrt(eps). For frozen A the
//! solution is B(r) D_0^{-1} e_a / sqrt(eps) with the sine-type power series
//! B(r) = sum_n A^n r^{2n+1} / (2n+1)!.

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{Frame, Manifold};
use crate::pathgrid::{AntiDevelopment, DiscretePath, FramePath};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaAdmissibility {
    pub kappa0: f64,
    pub delta: f64,
    pub sup_bound_ok: bool,
    pub expansion_ok: bool,
}

impl DeltaAdmissibility {
    pub fn new(kappa0: f64, delta: f64) -> Self {
        let kd2 = if kappa0 == 0.0 { 0.0 } else { kappa0 * delta * delta };
        Self {
            kappa0,
            delta,
            sup_bound_ok: kd2 == 0.0 || (kappa0.sqrt() * delta).cosh() * kd2 < 1.0,
            expansion_ok: kd2 < 1.0 / 3.0,
        }
    }

    pub fn ok(&self) -> bool {
        self.sup_bound_ok && self.expansion_ok
    }

    pub fn require(&self) -> Result<()> {
        if self.ok() {
            Ok(())
        } else {
            Err(Error::Admissibility { kappa0: self.kappa0, delta: self.delta })
        }
    }
}

/// Largest delta meeting both smallness conditions with a 0.99 safety factor,
/// capped at 0.9 times the injectivity radius.
pub fn default_delta(m: &Manifold) -> f64 {
    let cap = 0.9 * m.inj_radius;
    let k = m.kappa0;
    if k == 0.0 {
        return cap;
    }
    let bad = |d: f64| (k.sqrt() * d).cosh() * k * d * d >= 0.99 || k * d * d >= 0.99 / 3.0;
    let (mut lo, mut hi) = (0.0, (0.99 / (3.0 * k)).sqrt() * 1.0001);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bad(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo.min(cap)
}

/// Sup-norm bound (2 / sqrt(eps)) cosh(sqrt(kappa0) delta) on a basis field.
pub fn sup_bound(kappa0: f64, delta: f64, eps: f64) -> f64 {
    2.0 / eps.sqrt() * (kappa0.sqrt() * delta).cosh()
}

/// A = Omega_u(b', .) b' as a d x d matrix.
pub fn a_matrix(m: &Manifold, u: &Frame, bprime: &DVector<f64>) -> DMatrix<f64> {
    let d = m.dim;
    let mut a = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut e = DVector::zeros(d);
        e[c] = 1.0;
        let col = m.curvature_op(u, bprime, &e) * bprime;
        a.set_column(c, &col);
    }
    a
}

/// Power-series data for one interval with frozen coefficient matrix.
#[derive(Clone, Debug)]
pub struct JacobiSeries {
    pub eps: f64,
    pub a0: DMatrix<f64>,
    powers: Vec<DMatrix<f64>>,
    d0_inv: DMatrix<f64>,
}

impl JacobiSeries {
    pub fn new(a0: &DMatrix<f64>, eps: f64) -> Result<Self> {
        let d = a0.nrows();
        let mut powers = vec![DMatrix::identity(d, d)];
        // Keep powers until the scaled term falls below 1e-15 relative to the leading term.
        let mut coef = 1.0;
        for n in 0..60 {
            coef *= eps * eps / (((2 * n + 2) * (2 * n + 3)) as f64);
            let next = &powers[n] * a0;
            let small = next.norm() * coef < 1e-15;
            powers.push(next);
            if small {
                break;
            }
        }
        let mut s = Self { eps, a0: a0.clone(), powers, d0_inv: DMatrix::identity(d, d) };
        let d0 = s.b(eps);
        let d0_inv = d0
            .clone()
            .try_inverse()
            .filter(|inv| inv.norm() * d0.norm() < 1e12)
            .ok_or(Error::Degenerate(0))?;
        s.d0_inv = d0_inv;
        Ok(s)
    }

    fn series(&self, r: f64, first_power: i32) -> DMatrix<f64> {
        let d = self.a0.nrows();
        let mut out = DMatrix::zeros(d, d);
        // term_n = r^{2n+p} / (2n+p)!
        let p = first_power as usize;
        let mut c = r.powi(first_power) / (1..=p).map(|k| k as f64).product::<f64>();
        for (n, pw) in self.powers.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(pw.iter()) {
                *o += c * x;
            }
            let k = 2 * n + p;
            c *= r * r / (((k + 1) * (k + 2)) as f64);
        }
        out
    }

    /// B(r) = sum_n A^n r^{2n+1}/(2n+1)!.
    pub fn b(&self, r: f64) -> DMatrix<f64> {
        self.series(r, 1)
    }

    /// B'(r) = sum_n A^n r^{2n}/(2n)!.
    pub fn b_prime(&self, r: f64) -> DMatrix<f64> {
        self.series(r, 0)
    }

    /// int_0^r B = sum_n A^n r^{2n+2}/(2n+2)!.
    pub fn b_integral(&self, r: f64) -> DMatrix<f64> {
        self.series(r, 2)
    }

    /// B(r) D_0^{-1}.
    pub fn value(&self, r: f64) -> DMatrix<f64> {
        self.b(r) * &self.d0_inv
    }

    pub fn d0_inv(&self) -> &DMatrix<f64> {
        &self.d0_inv
    }
}

/// B(r) D_0^{-1} for the frozen-coefficient problem on [0, eps].
pub fn jacobi_series(a0: &DMatrix<f64>, eps: f64, r: f64) -> Result<DMatrix<f64>> {
    Ok(JacobiSeries::new(a0, eps)?.value(r))
}

/// Solution of the matrix problem Y'' = A(r) Y, Y(0) = 0, Y'(0) = I on a uniform
/// grid by classical RK4; returns (r_k, Y(r_k), Y'(r_k)).
pub fn shoot_fundamental<F>(a_of_r: F, d: usize, eps: f64, steps: usize) -> Vec<(f64, DMatrix<f64>, DMatrix<f64>)>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let h = eps / steps as f64;
    let mut y = DMatrix::zeros(d, d);
    let mut yp = DMatrix::<f64>::identity(d, d);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, y.clone(), yp.clone()));
    for k in 0..steps {
        let r = k as f64 * h;
        let a1 = a_of_r(r);
        let a2 = a_of_r(r + h / 2.0);
        let a3 = a_of_r(r + h);
        let k1y = yp.clone();
        let k1p = &a1 * &y;
        let k2y = &yp + &k1p * (h / 2.0);
        let k2p = &a2 * (&y + &k1y * (h / 2.0));
        let k3y = &yp + &k2p * (h / 2.0);
        let k3p = &a2 * (&y + &k2y * (h / 2.0));
        let k4y = &yp + &k3p * h;
        let k4p = &a3 * (&y + &k3y * h);
        y += (k1y + &k2y * 2.0 + &k3y * 2.0 + k4y) * (h / 6.0);
        yp += (k1p + &k2p * 2.0 + &k3p * 2.0 + k4p) * (h / 6.0);
        out.push((r + h, y.clone(), yp.clone()));
    }
    out
}

/// The field h_{a,i} on [s_{i-1}, s_i], in frame coordinates of the horizontal lift.
#[derive(Clone, Debug)]
pub struct JacobiBasisField {
    pub a: usize,
    pub i: usize,
    pub t0: f64,
    pub eps: f64,
    pub a0: DMatrix<f64>,
    pub bprime: DVector<f64>,
    /// Sub-grid samples (local r, h(r)).
    pub samples: Vec<(f64, DVector<f64>)>,
    /// Set when the coefficient varied along the interval and a shooting re-solve was used.
    pub defect_corrected: bool,
    series: JacobiSeries,
    shot: Option<Vec<(f64, DVector<f64>, DVector<f64>)>>,
}

impl JacobiBasisField {
    /// h at local offset r in [0, eps] (frame coordinates).
    pub fn value(&self, r: f64) -> DVector<f64> {
        match &self.shot {
            None => self.series.value(r).column(self.a).into_owned() / self.eps.sqrt(),
            Some(samples) => hermite_interp(samples, r),
        }
    }

    pub fn series(&self) -> &JacobiSeries {
        &self.series
    }

    /// sup over the sample grid of |h(r)|.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }
}

fn hermite_interp(samples: &[(f64, DVector<f64>, DVector<f64>)], r: f64) -> DVector<f64> {
    let n = samples.len() - 1;
    let h = samples[1].0 - samples[0].0;
    let k = ((r / h).floor() as usize).min(n - 1);
    let (r0, y0, d0) = &samples[k];
    let (_, y1, d1) = &samples[k + 1];
    let t = (r - r0) / h;
    let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
    let h10 = t.powi(3) - 2.0 * t * t + t;
    let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
    let h11 = t.powi(3) - t * t;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}

/// Number of sub-grid samples stored on each basis field.
pub const FIELD_SAMPLES: usize = 16;

/// Construct h_{a,i} for a = 0..d-1 (zero based) and interval i = 1..n.
pub fn jacobi_basis(
    m: &Manifold,
    path: &DiscretePath,
    frames: &FramePath,
    incs: &AntiDevelopment,
    a: usize,
    i: usize,
) -> Result<JacobiBasisField> {
    DeltaAdmissibility::new(m.kappa0, path.delta).require()?;
    if a >= m.dim || i == 0 || i > path.n() {
        return Err(Error::Domain(format!("no basis field h_({a},{i}) on this grid")));
    }
    let eps = path.eps();
    let bprime = incs.delta_b(i) / eps;
    let u0 = &frames.frames[i - 1];
    let a0 = a_matrix(m, u0, &bprime);
    let series = JacobiSeries::new(&a0, eps).map_err(|_| Error::Degenerate(i))?;
    let mut field = JacobiBasisField {
        a,
        i,
        t0: path.partition.time(i - 1),
        eps,
        a0,
        bprime,
        samples: vec![],
        defect_corrected: false,
        series,
        shot: None,
    };
    if m.curvature_varies() {
        // Coefficient changes along the interval through the frame: re-solve the
        // true linear problem by shooting on a fine grid.
        let x0 = path.point(i - 1).clone();
        let v = u0.apply(incs.delta_b(i));
        let a_of_r = |r: f64| {
            let t = r / eps;
            let p = m.exp(&x0, &(&v * t));
            let ur = m.transport_frame(u0, &p).expect("interval shorter than injectivity radius");
            a_matrix(m, &ur, &field.bprime)
        };
        let fund = shoot_fundamental(a_of_r, m.dim, eps, 256);
        let y_end = fund.last().expect("non-empty").1.clone();
        let c = y_end.try_inverse().ok_or(Error::Degenerate(i))?.column(a).into_owned() / eps.sqrt();
        field.shot = Some(fund.iter().map(|(r, y, yp)| (*r, y * &c, yp * &c)).collect());
        field.defect_corrected = true;
    }
    field.samples = (0..=FIELD_SAMPLES)
        .map(|k| {
            let r = eps * k as f64 / FIELD_SAMPLES as f64;
            (r, field.value(r))
        })
        .collect();
    Ok(field)
}

/// Small-increment main term of a basis field next to the exact frozen-coefficient field.
#[derive(Clone, Debug, Serialize)]
pub struct RemainderExpansion {
    pub main: Vec<f64>,
    pub exact: Vec<f64>,
    pub remainder: f64,
    /// remainder / (|Delta b|^3 eps^{-1/2}).
    pub measured_constant: f64,
}

/// Main term eps^{-3/2}(r I + [Db]^2 r^3/(6 eps^2))(I - [Db]^2/6) e_a.
pub fn expansion_main_term(m: &Manifold, u: &Frame, delta_b: &DVector<f64>, a: usize, eps: f64, r: f64) -> DVector<f64> {
    let d = m.dim;
    let sq = a_matrix(m, u, delta_b);
    let id = DMatrix::<f64>::identity(d, d);
    let left = &id * r + &sq * (r.powi(3) / (6.0 * eps * eps));
    let right = &id - &sq / 6.0;
    let mut e = DVector::zeros(d);
    e[a] = 1.0;
    (left * right * e) * eps.powf(-1.5)
}

pub fn remainder_expansion(
    m: &Manifold,
    u: &Frame,
    delta_b: &DVector<f64>,
    a: usize,
    eps: f64,
    r: f64,
) -> Result<RemainderExpansion> {
    let kd2 = m.kappa0 * delta_b.norm_squared();
    if kd2 >= 1.0 / 3.0 {
        return Err(Error::Admissibility { kappa0: m.kappa0, delta: delta_b.norm() });
    }
    let main = expansion_main_term(m, u, delta_b, a, eps, r);
    let a0 = a_matrix(m, u, &(delta_b / eps));
    let exact = JacobiSeries::new(&a0, eps)?.value(r).column(a).into_owned() / eps.sqrt();
    let remainder = (&exact - &main).norm();
    let scale = delta_b.norm().powi(3) / eps.sqrt();
    Ok(RemainderExpansion {
        main: main.iter().cloned().collect(),
        exact: exact.iter().cloned().collect(),
        remainder,
        measured_constant: if scale > 0.0 { remainder / scale } else { 0.0 },
    })
}

fn legendre(order: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [4usize, 8, 16, 32, 64]
            .iter()
            .map(|&k| GaussLegendre::new(NonZeroUsize::new(k).expect("positive")))
            .collect()
    });
    let idx = match order {
        4 => 0,
        8 => 1,
        16 => 2,
        32 => 3,
        64 => 4,
        _ => panic!("unsupported quadrature order {order}"),
    };
    &rules[idx]
}

/// Gauss-Legendre quadrature of a matrix-valued integrand on [0, len].
pub fn gl_matrix<F>(order: usize, len: f64, shape: (usize, usize), f: F) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let rule = legendre(order);
    let mut out = DMatrix::zeros(shape.0, shape.1);
    for &(x, w) in rule.as_node_weight_pairs() {
        let r = 0.5 * len * (x + 1.0);
        out += f(r) * (0.5 * len * w);
    }
    out
}

/// Order-8 Gauss-Legendre, doubled while successive results differ by more than 1e-9.
pub fn adaptive_gl_matrix<F>(len: f64, shape: (usize, usize), f: F) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let mut order = 8;
    let mut cur = gl_matrix(order, len, shape, &f);
    while order < 64 {
        let next = gl_matrix(order * 2, len, shape, &f);
        let diff = (&next - &cur).norm();
        cur = next;
        order *= 2;
        if diff <= 1e-9 {
            break;
        }
    }
    cur
}

/// Frames along the geodesic of interval i: u(r) at local offset r.
pub struct IntervalGeodesic<'a> {
    pub x0: &'a crate::geometry::Point,
    pub velocity: DVector<f64>,
    pub u0: &'a Frame,
    pub eps: f64,
}

impl IntervalGeodesic<'_> {
    pub fn new<'a>(
        path: &'a DiscretePath,
        frames: &'a FramePath,
        incs: &AntiDevelopment,
        i: usize,
    ) -> IntervalGeodesic<'a> {
        let u0 = &frames.frames[i - 1];
        IntervalGeodesic { x0: path.point(i - 1), velocity: u0.apply(incs.delta_b(i)), u0, eps: path.eps() }
    }

    /// Omega_{u(r)}(a, b), transporting the frame only when the curvature form depends on it.
    pub fn omega(&self, m: &Manifold, r: f64, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
        if m.curvature_varies() {
            let p = m.exp(self.x0, &(&self.velocity * (r / self.eps)));
            let ur = m.transport_frame(self.u0, &p).expect("interval shorter than injectivity radius");
            m.curvature_op(&ur, a, b)
        } else {
            m.curvature_op(self.u0, a, b)
        }
    }
}

/// q_{s_j}(X) = int_0^{s_j} Omega_{u(r)}(b'(r), X(r)) dr for a field supported on
/// [s_{j-1}, s_j] given in frame coordinates by `x_of_r` (local offset r).
pub fn q_integral<F>(m: &Manifold, geo: &IntervalGeodesic, bprime: &DVector<f64>, x_of_r: F) -> DMatrix<f64>
where
    F: Fn(f64) -> DVector<f64>,
{
    adaptive_gl_matrix(geo.eps, (m.dim, m.dim), |r| geo.omega(m, r, bprime, &x_of_r(r)))
}

/// q_{s_j}(h_{a,i}); the field is only materialized on its own interval, so it
/// vanishes for j < i and is not available for j > i.
pub fn q_operator(
    m: &Manifold,
    path: &DiscretePath,
    frames: &FramePath,
    incs: &AntiDevelopment,
    field: &JacobiBasisField,
    j: usize,
) -> Result<DMatrix<f64>> {
    if j < field.i {
        return Ok(DMatrix::zeros(m.dim, m.dim));
    }
    if j > field.i {
        return Err(Error::Domain(format!(
            "h_({},{}) is not materialized beyond s_{}; q at s_{} is undefined here",
            field.a, field.i, field.i, j
        )));
    }
    let geo = IntervalGeodesic::new(path, frames, incs, field.i);
    Ok(q_integral(m, &geo, &field.bprime, |r| field.value(r)))
}
