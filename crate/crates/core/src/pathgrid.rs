//! Piecewise-geodesic paths on a uniform partition of [0, 1].

use nalgebra::DVector;
use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Frame, Manifold, ManifoldSpec, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Partition {
    pub n: usize,
    pub eps: f64,
}

impl Partition {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("partition needs at least one interval".into()));
        }
        Ok(Self { n, eps: 1.0 / n as f64 })
    }

    /// Build from explicit grid times; only uniform grids on [0, 1] are accepted.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Config("partition needs at least two times".into()));
        }
        let p = Self::new(times.len() - 1)?;
        for (i, t) in times.iter().enumerate() {
            if (t - p.time(i)).abs() > 1e-12 {
                return Err(Error::Config(format!("non-uniform partition at s_{i} = {t}")));
            }
        }
        Ok(p)
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.eps
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.time(i)).collect()
    }

    /// Trapezoid weights for the nodes s_0..s_n.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.eps; self.n + 1];
        w[0] = self.eps / 2.0;
        w[self.n] = self.eps / 2.0;
        w
    }
}

/// Grid values x_0 = o, x_1, ..., x_n of a path in H_P^delta(M).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub origin: Point,
    pub points: Vec<Point>,
    pub partition: Partition,
    pub delta: f64,
}

impl DiscretePath {
    pub fn n(&self) -> usize {
        self.partition.n
    }

    pub fn eps(&self) -> f64 {
        self.partition.eps
    }

    /// x_i with x_0 the origin.
    pub fn point(&self, i: usize) -> &Point {
        if i == 0 {
            &self.origin
        } else {
            &self.points[i - 1]
        }
    }

    /// Same grid with different interior points (no validation).
    pub fn with_points(&self, points: Vec<Point>) -> Self {
        Self { origin: self.origin.clone(), points, partition: self.partition, delta: self.delta }
    }
}

/// Frames u(s_0), ..., u(s_n) of the discrete horizontal lift.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePath {
    pub frames: Vec<Frame>,
}

/// Anti-development increments; `increments[i - 1]` holds Delta_i b for i = 1..=n+1
/// with Delta_{n+1} b = 0 stored explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct AntiDevelopment {
    pub increments: Vec<DVector<f64>>,
}

impl AntiDevelopment {
    pub fn delta_b(&self, i: usize) -> &DVector<f64> {
        &self.increments[i - 1]
    }
}

pub fn make_path(
    m: &Manifold,
    origin: Point,
    points: Vec<Point>,
    partition: Partition,
    delta: f64,
) -> Result<DiscretePath> {
    if points.len() != partition.n {
        return Err(Error::PartitionMismatch(points.len(), partition.n));
    }
    if !(delta > 0.0 && delta <= m.inj_radius) {
        return Err(Error::Config(format!(
            "delta {delta} must be positive and at most the injectivity radius {}",
            m.inj_radius
        )));
    }
    m.check_point(&origin, 1e-10)?;
    for p in &points {
        m.check_point(p, 1e-10)?;
    }
    let path = DiscretePath { origin, points, partition, delta };
    check_delta(m, &path)?;
    Ok(path)
}

/// Verify rho(x_{i-1}, x_i) < delta on every interval.
pub fn check_delta(m: &Manifold, path: &DiscretePath) -> Result<()> {
    for i in 1..=path.n() {
        let dist = m.dist(path.point(i - 1), path.point(i));
        if !(dist < path.delta) {
            return Err(Error::DeltaViolation { interval: i, dist, delta: path.delta });
        }
    }
    Ok(())
}

/// Discrete horizontal lift: transport `frame0` along each grid geodesic.
pub fn horizontal_lift(m: &Manifold, path: &DiscretePath, frame0: &Frame) -> Result<FramePath> {
    let mut frames = Vec::with_capacity(path.n() + 1);
    frames.push(frame0.clone());
    for i in 1..=path.n() {
        let next = m.transport_frame(&frames[i - 1], path.point(i))?;
        frames.push(next);
    }
    Ok(FramePath { frames })
}

pub fn anti_development(m: &Manifold, path: &DiscretePath, frames: &FramePath) -> Result<AntiDevelopment> {
    if frames.frames.len() != path.n() + 1 {
        return Err(Error::PartitionMismatch(frames.frames.len().saturating_sub(1), path.n()));
    }
    let mut increments = Vec::with_capacity(path.n() + 1);
    for i in 1..=path.n() {
        let v = m.log(path.point(i - 1), path.point(i))?;
        increments.push(m.frame_coords(&frames.frames[i - 1], &v));
    }
    increments.push(DVector::zeros(m.dim));
    Ok(AntiDevelopment { increments })
}

/// Develop increments Delta_1 b..Delta_n b from (o, frame0).
pub fn develop(
    m: &Manifold,
    origin: &Point,
    frame0: &Frame,
    increments: &[DVector<f64>],
    delta: f64,
) -> Result<(DiscretePath, FramePath)> {
    let partition = Partition::new(increments.len())?;
    let mut points = Vec::with_capacity(increments.len());
    let mut frames = vec![frame0.clone()];
    let mut x = origin.clone();
    for (k, db) in increments.iter().enumerate() {
        let len = db.norm();
        if !(len < delta) {
            return Err(Error::DeltaViolation { interval: k + 1, dist: len, delta });
        }
        let u = &frames[k];
        let y = m.exp(&x, &u.apply(db));
        let next = m.transport_frame(u, &y)?;
        frames.push(next);
        points.push(y.clone());
        x = y;
    }
    let path = DiscretePath { origin: origin.clone(), points, partition, delta };
    Ok((path, FramePath { frames }))
}

/// E_P = sum rho^2(x_{i-1}, x_i) / eps.
pub fn energy(m: &Manifold, path: &DiscretePath) -> f64 {
    (1..=path.n()).map(|i| m.dist(path.point(i - 1), path.point(i)).powi(2)).sum::<f64>() / path.eps()
}

/// d^P(gamma, eta) = eps sum_i rho(gamma_{s_i}, eta_{s_i}) over i = 1..n.
pub fn path_distance(m: &Manifold, a: &DiscretePath, b: &DiscretePath) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::PartitionMismatch(a.n(), b.n()));
    }
    let mut s = 0.0;
    for i in 1..=a.n() {
        s += m.distance(a.point(i), b.point(i))?;
    }
    Ok(a.eps() * s)
}

#[derive(Serialize)]
struct PathHeader<'a> {
    manifold: &'a ManifoldSpec,
    n: usize,
    eps: f64,
    delta: f64,
    seed: Option<u64>,
}

/// Write a path as `# {json header}` followed by CSV rows (i, s_i, coords...).
pub fn write_path_csv<W: Write>(
    w: &mut W,
    m: &Manifold,
    path: &DiscretePath,
    seed: Option<u64>,
    weight: Option<f64>,
) -> std::io::Result<()> {
    let header = PathHeader { manifold: &m.spec, n: path.n(), eps: path.eps(), delta: path.delta, seed };
    writeln!(w, "# {}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
    let mut cols = vec!["i".to_string(), "s".to_string()];
    cols.extend((0..m.ambient_dim()).map(|k| format!("coord_{k}")));
    if weight.is_some() {
        cols.push("weight".into());
    }
    writeln!(w, "{}", cols.join(","))?;
    for i in 0..=path.n() {
        let mut row = vec![i.to_string(), fmt17(path.partition.time(i))];
        row.extend(path.point(i).iter().map(|x| fmt17(*x)));
        if let Some(wt) = weight {
            row.push(fmt17(wt));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Round-trip-safe formatting with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
