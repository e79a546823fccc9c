use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The trace breaks the well-formedness contract. `index` is 0-based.
    #[error("trace violation at record {index}: {message}")]
    TraceViolation { index: usize, message: String },

    /// Internal bookkeeping went inconsistent. Always a bug.
    #[error("invariant fault: {0}")]
    Invariant(String),
}

impl SimError {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        SimError::Invariant(msg.into())
    }
}
