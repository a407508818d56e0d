use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("norm index p = {0} is not in [1, inf]")]
    InvalidNormIndex(f64),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry ({row}, {col}) lies outside bandwidth {bandwidth}")]
    OutsideBand {
        row: usize,
        col: usize,
        bandwidth: usize,
    },
    #[error("negative time t = {0}")]
    NegativeTime(f64),
    #[error("tolerance must be in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("||A||*t = {value} exceeds the exponential cap {cap}")]
    Overflow { value: f64, cap: f64 },
    #[error("power iteration did not converge after {iterations} iterations (best lower bound {best})")]
    NonConvergence { best: f64, iterations: usize },
    #[error("complex entry in a real-field object")]
    FieldMismatch,
    #[error("malformed matrix document: {0}")]
    Malformed(String),
}
