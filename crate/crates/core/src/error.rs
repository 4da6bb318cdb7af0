use thiserror::Error;

/// Errors raised by the alignment library.
#[derive(Debug, Error)]
pub enum AlignError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Two sphere points are (numerically) antipodal, so the connecting
    /// geodesic is not unique.
    #[error("degenerate point pair: {0}")]
    DegeneratePair(String),

    #[error("degenerate basis: element {index} has residual norm {norm:e}")]
    DegenerateBasis { index: usize, norm: f64 },

    /// An iterative estimator hit its iteration cap. `last` holds the final
    /// iterate so callers can still inspect it.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error(
        "insufficient posterior support: {available} samples with finite weight, {needed} requested; \
         increase the importance sample size"
    )]
    InsufficientSupport { needed: usize, available: usize },

    #[error("DPD is undefined for identical functions")]
    UndefinedDpd,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AlignError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(AlignError::InvalidInput(msg.into()))
}

pub(crate) fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(AlignError::LengthMismatch { left, right });
    }
    Ok(())
}
