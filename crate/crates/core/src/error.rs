use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree {degree}: {reason}")]
    InvalidDegree { degree: usize, reason: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("tau = {tau} lies outside [0, 1]")]
    Domain { tau: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("at least {needed} coefficients required, got {got}")]
    InsufficientDegree { needed: usize, got: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: line {line}, column `{column}`: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        reason: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("y = {y} is outside the predicted support [{lo}, {hi}]")]
    OutOfSupport { y: f64, lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("quantile at tau = {tau} is infinite for this family")]
    InfiniteQuantile { tau: f64 },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            got,
        }
    }
}
