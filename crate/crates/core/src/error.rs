use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `row` is the 1-based line number in the file.
    #[error("{path}: row {row}, column {column}: {message}")]
    Load {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("model/explanation mismatch: {0}")]
    Mismatch(String),

    #[error("incomplete explanation cache: {0}")]
    IncompleteCache(String),

    #[error("io error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input (configs, specs, data files) rather than
    /// a failure while running. The CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Load { .. } | Error::InvalidInput(_) | Error::Config(_) | Error::Dimension { .. }
        )
    }
}
