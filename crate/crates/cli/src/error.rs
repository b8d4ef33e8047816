use std::path::PathBuf;

use onn_core::ErrorKind;
use serde_json::json;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{file}: invalid value at `{field}`: {message}")]
    Config {
        file: String,
        field: String,
        message: String,
    },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sample index {index} is outside the test set (size {len})")]
    SampleIndex { index: usize, len: usize },

    #[error(transparent)]
    Core(#[from] onn_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.kind() == ErrorKind::Numeric => 4,
            _ => 3,
        }
    }

    fn class(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            4 => "numeric",
            _ => "data",
        }
    }

    /// One line of JSON for stderr.
    pub fn to_json_line(&self) -> String {
        json!({ "error": self.class(), "code": self.exit_code(), "message": self.to_string() }).to_string()
    }
}
