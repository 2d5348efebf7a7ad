use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    Dimension {
        context: String,
        left: String,
        right: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("non-finite value in {term}: training aborted")]
    NonFinite { term: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(context: impl Into<String>, left: impl ToString, right: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
