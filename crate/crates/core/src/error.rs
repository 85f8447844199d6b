use std::path::PathBuf;

/// Errors produced by the codec, the model, and the trainer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt stream: {0}")]
    Corruption(String),

    #[error("unsupported image: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable short name used in machine-readable CLI output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Range(_) => "range",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Capacity(_) => "capacity",
            Error::State(_) => "state",
            Error::Format(_) => "format",
            Error::Corruption(_) => "corruption",
            Error::Unsupported(_) => "unsupported",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
