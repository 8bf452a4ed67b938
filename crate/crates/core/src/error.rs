use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Span list does not form a total cover of the document.
    #[error("coverage error at position {position}: {reason}")]
    Coverage { position: usize, reason: String },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    /// No tag path satisfies the active constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("non-finite gradient at step {step} ({detail})")]
    NonFiniteGradient { step: u64, detail: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structured text that breaks its grammar at `position` (a token or
    /// chunk index, depending on the format).
    #[error("malformed input at position {position}: {message}")]
    Malformed { position: usize, message: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("undefined score: {0}")]
    UndefinedScore(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file path to an error raised while reading that file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::InFile { .. }) => e,
            other => Error::InFile {
                path: path.into(),
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with any file context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }
}
