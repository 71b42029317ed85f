use thiserror::Error;

/// Failure modes shared by every numerical stage.
#[derive(Debug, Error)]
pub enum Error {
    /// An index or argument lies outside the range where the construction is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Grids or array shapes do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// A computation hit a degenerate configuration (vanishing determinant and the like).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A refinement sequence failed to converge.
    #[error("accuracy error: {message} (estimates: {estimates:?})")]
    Accuracy { message: String, estimates: Vec<f64> },
    /// Input data violate a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The Picard iteration stopped contracting.
    #[error("iteration failed to contract: {message}")]
    NonContraction {
        message: String,
        trace: Box<crate::solver::IterationTrace>,
    },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}
