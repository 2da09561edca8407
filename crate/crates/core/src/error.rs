use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Hölder certificate {claimed} is below the measured seminorm {measured} (alpha = {alpha})")]
    InvalidCertificate {
        alpha: f64,
        claimed: f64,
        measured: f64,
    },

    #[error("compatibility violated: beta + (alpha - 1) gamma = {value} <= 0 with C_H != 0")]
    Incompatible { value: f64 },

    #[error("time step {dt} exceeds the monotonicity limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value at t = {time} after {steps} steps")]
    NonFinite { time: f64, steps: usize },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual})")]
    MaxIterations {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no exact oracle for {0}")]
    UnsupportedOracle(String),

    #[error("need at least {needed} usable points for a rate fit, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("solve failed for epsilon = {epsilon}, N = {points}: {source}")]
    Solve {
        epsilon: f64,
        points: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
