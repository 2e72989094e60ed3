use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: String, value: f64 },

    #[error("fidelity must be positive, got {0}")]
    NonPositiveFidelity(f64),

    /// Cholesky failed even after the bounded jitter escalation.
    #[error("ill-conditioned {what}: factorization failed at pivot {pivot} after jitter {jitter:e} ({params})")]
    IllConditioned {
        what: &'static str,
        pivot: usize,
        jitter: f64,
        params: String,
    },

    #[error("internal consistency: variance {value:e} at point {index} is negative beyond tolerance")]
    NegativeVariance { index: usize, value: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("no noise variance for fidelity level {0}")]
    UnknownLevel(f64),

    #[error("need at least {needed} points, found {found}")]
    NotEnoughPoints { needed: usize, found: usize },

    #[error("model could not be fitted: {0}")]
    Unfittable(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("input outside the unit box: {0:?}")]
    OutOfBox(Vec<f64>),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
