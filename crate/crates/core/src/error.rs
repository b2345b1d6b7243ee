use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("missing required column `{0}` in header")]
    MissingColumn(String),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: String },

    #[error("invalid date: {0}")]
    InvalidDate(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("too few samples: need at least {need}, have {have}")]
    TooFewSamples { need: usize, have: usize },

    #[error("unknown point id {0}")]
    UnknownPoint(u64),

    #[error("coincident points have no bearing")]
    CoincidentPoints,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
