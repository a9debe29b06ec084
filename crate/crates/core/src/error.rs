use thiserror::Error;

use crate::snapshot::SnapshotError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated an operation's documented preconditions.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("blow-up or instability at t = {t}")]
    BlowUp { t: f64 },

    #[error("contraction failure (data too large): ratios {ratios:?}")]
    ContractionFailure { ratios: Vec<f64> },

    #[error("Cesàro non-convergence after {iterations} iterations (last residual {last_residual:e})")]
    CesaroNonConvergence {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("outside small-data regime: {0}")]
    OutsideSmallData(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Snapshot(#[from] SnapshotError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
