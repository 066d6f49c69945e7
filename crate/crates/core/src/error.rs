use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RbmError>;

#[derive(Debug, Error)]
pub enum RbmError {
    /// Array shapes disagree with the model or with each other.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value lies outside its admissible set (e.g. a non-binary unit state).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller-supplied arguments violate a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Operation requested in a state that cannot support it.
    #[error("invalid state: {0}")]
    State(String),

    /// Exhaustive enumeration would exceed the supported size.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("degenerate trajectory: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RbmError {
    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        RbmError::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs rather than by the computation itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            RbmError::Dimension(_)
                | RbmError::Domain(_)
                | RbmError::Input(_)
                | RbmError::Format { .. }
                | RbmError::EmptyDataset(_)
                | RbmError::Capacity(_)
        )
    }
}
