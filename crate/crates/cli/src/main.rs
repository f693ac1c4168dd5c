mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigError;

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Output directory for report.json, CSV artifacts and manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (default: PATHHEAT_SEED or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Manifold, e.g. sphere:2, sphere:2:3.0, euclidean:1, circle, torus:1,1, hyperbolic:2.
    #[arg(long, global = true)]
    manifold: Option<String>,
    /// Number of partition intervals.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Step bound delta, a number or "auto".
    #[arg(long, global = true)]
    delta: Option<String>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Geometry self-checks on random points.
    GeomCheck {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Run the path-space heat flow.
    Simulate {
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long = "t")]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        chains: Option<usize>,
        /// Statistics to report: covariance or path.
        #[arg(long, default_value = "covariance")]
        stats: String,
    },
    /// MALA sampling of the approximation measure.
    SampleNu {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Importance-sampled total mass for a list of partitions.
    Mass {
        #[arg(long, default_value = "4,8,16")]
        ns: String,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Convergence of an endpoint functional towards the weighted Wiener reference.
    Convergence {
        #[arg(long, default_value = "2,4,8,16")]
        ns: String,
        #[arg(long)]
        samples: Option<usize>,
        /// Ambient axis of the endpoint coordinate (default: the last one).
        #[arg(long)]
        axis: Option<usize>,
    },
    /// Integration-by-parts check under horizontal Brownian motion.
    Ibp {
        #[arg(long)]
        functional: Option<String>,
        #[arg(long)]
        direction: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Quadratic variation of a coordinate functional along the heat flow.
    Qv {
        #[arg(long = "t")]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        index: Option<usize>,
        #[arg(long, default_value_t = 0)]
        axis: usize,
    },
    /// Discrete drift against its continuum limit on a smooth path.
    DriftLimit {
        /// great_circle, latitude, line or flat_sine.
        #[arg(long, default_value = "great_circle")]
        path: String,
        #[arg(long, default_value = "8,16,32,64,128")]
        ns: String,
    },
    /// Functional-inequality constants over a grid of K.
    Constants {
        #[arg(long, default_value = "-2:2:0.5", allow_hyphen_values = true)]
        k_grid: String,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long = "horizon", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long = "intervals", default_value_t = 4)]
        intervals: usize,
        #[arg(long, default_value_t = 10_000)]
        truncation: usize,
    },
    /// Empirical log-Sobolev slack.
    Lsi {
        #[arg(long)]
        functional: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Gradient characterization of the Ricci lower bound.
    GradIneq {
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 0.1)]
        t2: f64,
        #[arg(long, default_value_t = 0)]
        axis: usize,
    },
    /// The acceptance suite.
    Verify {
        #[arg(long, default_value = "desk")]
        profile: String,
    },
}

#[derive(Parser)]
#[command(name = "pathheat", version, about = "Path-space heat flow experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli.common, &cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else if let Some(pathheat::Error::Config(_)) = e.downcast_ref::<pathheat::Error>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
