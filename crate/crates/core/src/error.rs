use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("enumeration too large: {what} has {size} elements (limit {limit})")]
    EnumerationTooLarge {
        what: &'static str,
        size: f64,
        limit: f64,
    },

    #[error("equilibrium solver did not converge (best deviation gap {best_gap:.3e})")]
    ConvergenceFailure { best_gap: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
