use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("no images matched the digit filter {0:?}")]
    EmptySelection(Vec<u8>),

    #[error("dimension error: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("feature column {column} is constant; min-max scaling is undefined")]
    ScaleDegenerate { column: usize },

    #[error("requested {requested} samples but only {available} are available")]
    Size { requested: usize, available: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("comb cannot be flattened within the shaper range; lines {lines:?} are too weak")]
    Unflattenable { lines: Vec<usize> },

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("recovery error: {0}")]
    Recovery(String),

    #[error("plan error: {0}")]
    Plan(String),
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Divergence { .. }
            | Error::Domain(_)
            | Error::Unflattenable { .. }
            | Error::Recovery(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
