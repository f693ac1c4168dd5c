use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cut locus: distance {dist} is not below the injectivity radius {inj}")]
    CutLocus { dist: f64, inj: f64 },

    #[error("delta violation on interval {interval}: distance {dist} >= delta {delta}")]
    DeltaViolation {
        interval: usize,
        dist: f64,
        delta: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "delta {delta} is not admissible for kappa0 {kappa0} \
         (need cosh(sqrt(k) d) k d^2 < 1 and k d^2 < 1/3)"
    )]
    Admissibility { kappa0: f64, delta: f64 },

    #[error("degenerate interval {0}: boundary matrix is singular")]
    Degenerate(usize),

    #[error("partition mismatch: {0} vs {1} intervals")]
    PartitionMismatch(usize, usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sampler tuning failed: {0}")]
    Tuning(String),

    #[error("proposal mismatch: effective sample size {ess:.1} below {min:.1}")]
    ProposalMismatch { ess: f64, min: f64 },

    #[error("missing driving noise: {0}")]
    Provenance(String),

    #[error("step failed after {halvings} halvings: {source}")]
    StepFailed {
        halvings: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
