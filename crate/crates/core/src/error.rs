use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {what} needs {required} samples, got {actual}")]
    LengthMismatch {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("degenerate symbol at block {block}, bin {bin}: |D| = {magnitude:e}")]
    DegenerateSymbol {
        block: usize,
        bin: usize,
        magnitude: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
