use thiserror::Error;

/// Errors produced by the rolling library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("reprojection failed after {iterations} iterations (residual {residual:.3e})")]
    ReprojectionFailed { iterations: usize, residual: f64 },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("grid too short: need at least {needed} steps, have {have}")]
    GridTooShort { needed: usize, have: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown model: {0}")]
    UnknownModel(String),

    #[error("strategy unavailable for model {model}: {reason}")]
    StrategyUnavailable { model: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
