use thiserror::Error;

/// Errors produced by the bound solver, scheme engines and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what} at index {index}: {value} (must be > 0)")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("causality violated: A[{receiver}] has nonzero entry at ({row}, {col}) on or above the diagonal")]
    Causality {
        receiver: usize,
        row: usize,
        col: usize,
    },
    #[error("solver failed: {reason}")]
    Solver { reason: String, trace: Vec<(f64, f64)> },
    #[error("solver accuracy: residual {residual:e} exceeds tolerance {tol:e}")]
    Accuracy { residual: f64, tol: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("trial with seed {seed} failed: {source}")]
    Trial { seed: u64, source: Box<Error> },
    #[error("sweep cell {cell} failed: {source}")]
    Cell { cell: usize, source: Box<Error> },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
