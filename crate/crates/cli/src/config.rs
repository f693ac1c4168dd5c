//! Run configuration: a TOML document whose values are overridden by flags.

use std::path::Path;

use pathheat::dynamics::Variant;
use pathheat::functionals::DirectionField;
use pathheat::geometry::{Manifold, ManifoldSpec};
use pathheat::jacobi::{default_delta, DeltaAdmissibility};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSetting {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub variant: Option<Variant>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub modes: Option<usize>,
    pub chains: Option<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub samples: Option<usize>,
    pub burn_in: Option<usize>,
    pub chains: Option<usize>,
    pub thin: Option<usize>,
    pub steps: Option<usize>,
}

/// Everything a run can be configured with; every key is optional in the file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: Option<ManifoldSpec>,
    pub n: Option<usize>,
    pub delta: Option<DeltaSetting>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub functionals: Option<Vec<String>>,
    pub direction: Option<String>,
    pub k: Option<f64>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))
    }

    pub fn manifold(&self) -> anyhow::Result<Manifold> {
        let spec = self.manifold.clone().unwrap_or(ManifoldSpec::Sphere { dim: 2, radius: 1.0 });
        Manifold::from_spec(&spec).map_err(|e| config_err(format!("manifold: {e}")))
    }

    /// Resolves `delta`: "auto" (the default) picks the largest admissible value.
    pub fn resolve_delta(&self, m: &Manifold, need_admissible: bool) -> anyhow::Result<f64> {
        let delta = match &self.delta {
            None => default_delta(m),
            Some(DeltaSetting::Named(s)) if s == "auto" => default_delta(m),
            Some(DeltaSetting::Named(s)) => return Err(config_err(format!("delta: expected a number or \"auto\", got \"{s}\""))),
            Some(DeltaSetting::Value(v)) => *v,
        };
        if !(delta > 0.0 && delta <= m.inj_radius) {
            return Err(config_err(format!("delta: {delta} must lie in (0, {}]", m.inj_radius)));
        }
        if need_admissible && !DeltaAdmissibility::new(m.kappa0, delta).ok() {
            return Err(config_err(format!("delta: {delta} is not admissible for curvature bound {}", m.kappa0)));
        }
        Ok(delta)
    }
}

/// `euclidean:D`, `circle[:L]`, `torus:L1,L2,..`, `sphere:D[:R]`, `hyperbolic:D[:R]`.
pub fn parse_manifold(s: &str) -> anyhow::Result<ManifoldSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || config_err(format!("manifold: cannot parse '{s}'"));
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    let int = |x: &str| x.parse::<usize>().map_err(|_| bad());
    Ok(match parts.as_slice() {
        ["euclidean", d] => ManifoldSpec::Euclidean { dim: int(d)? },
        ["circle"] => ManifoldSpec::Circle { circumference: 2.0 * std::f64::consts::PI },
        ["circle", l] => ManifoldSpec::Circle { circumference: num(l)? },
        ["torus", ls] => ManifoldSpec::Torus { periods: ls.split(',').map(num).collect::<anyhow::Result<_>>()? },
        ["sphere", d] => ManifoldSpec::Sphere { dim: int(d)?, radius: 1.0 },
        ["sphere", d, r] => ManifoldSpec::Sphere { dim: int(d)?, radius: num(r)? },
        ["hyperbolic", d] => ManifoldSpec::Hyperbolic { dim: int(d)?, radius: 1.0 },
        ["hyperbolic", d, r] => ManifoldSpec::Hyperbolic { dim: int(d)?, radius: num(r)? },
        _ => return Err(bad()),
    })
}

/// `linear:v1,..`, `sine:FREQ:v1,..`, `bridge:v1,..`.
pub fn parse_direction(s: &str) -> anyhow::Result<DirectionField> {
    let bad = || config_err(format!("direction: cannot parse '{s}'"));
    let vec = |x: &str| -> anyhow::Result<Vec<f64>> {
        x.split(',').map(|c| c.parse::<f64>().map_err(|_| bad())).collect()
    };
    let parts: Vec<&str> = s.split(':').collect();
    Ok(match parts.as_slice() {
        ["linear", v] => DirectionField::Linear { v: vec(v)? },
        ["bridge", v] => DirectionField::Bridge { v: vec(v)? },
        ["sine", f, v] => DirectionField::Sine { v: vec(v)?, freq: f.parse().map_err(|_| bad())? },
        _ => return Err(bad()),
    })
}

/// `a:b:step` inclusive grid.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || config_err(format!("k-grid: expected start:stop:step, got '{s}'"));
    let v: Vec<f64> = s.split(':').map(|x| x.parse::<f64>().map_err(|_| bad())).collect::<anyhow::Result<_>>()?;
    let [a, b, h] = v.as_slice() else { return Err(bad()) };
    if h.is_nan() || *h <= 0.0 || b < a {
        return Err(bad());
    }
    let count = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| a + i as f64 * h).collect())
}

/// Comma-separated list of positive integers.
pub fn parse_list(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| config_err(format!("expected a list of integers, got '{s}'"))))
        .collect()
}
