use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `line` and `column` are 1-based when known.
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed input that breaks a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Non-finite cell in a feature file (0-based row/column).
    #[error("{path}: non-finite value at row {row}, col {col}")]
    NonFinite {
        path: PathBuf,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate feature: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown video id {0:?}")]
    UnknownVideo(String),

    #[error("unknown class: {0}")]
    UnknownClass(String),

    #[error("infeasible synthetic configuration: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json_parse(path: impl Into<PathBuf>, err: serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by bad or missing inputs rather than by the
    /// pipeline itself. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::NonFinite { .. }
                | Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::Json { .. }
        )
    }
}
