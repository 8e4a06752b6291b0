use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented constraint.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },

    /// Every agent's belief density vanished, so no state price density
    /// exists there.
    #[error("solvency violation: all belief densities vanish{}", .index.map(|j| format!(" at grid index {j}")).unwrap_or_default())]
    SolvencyViolation { index: Option<usize> },

    /// An iterative solver stopped before meeting its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("singular price diffusion matrix")]
    SingularDiffusion,

    #[error("config parse error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
