use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numeric => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("parse error at byte offset {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}dimension mismatch: expected {expected}, found {found}", at_line(*.line))]
    DimensionMismatch {
        line: Option<usize>,
        expected: usize,
        found: usize,
    },

    #[error("{}non-finite coordinate at index {index}", at_line(*.line))]
    NonFinite { line: Option<usize>, index: usize },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },

    #[error("dataset {0:?} is empty")]
    EmptyDataset(String),

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("unsupported monitor file version {0}")]
    UnknownVersion(String),

    #[error("invalid monitor file: {0}")]
    InvalidMonitor(String),

    #[error("unknown monitor kind {0:?}")]
    UnknownKind(String),

    #[error("monitor has no calibrated threshold")]
    NotCalibrated,

    #[error("empty report")]
    EmptyReport,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("calibrated threshold is infinite: {violating} of {n} calibration points violate a zero-spread box dimension")]
    InfiniteThreshold { violating: usize, n: usize },

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("mean feature vector is zero; cosine similarity is undefined")]
    ZeroMean,
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Builds a [`Error::Parse`] from a serde_json error, translating its
    /// line/column position into a byte offset within `text`.
    pub fn from_json(err: &serde_json::Error, text: &str) -> Self {
        let line = err.line();
        let column = err.column();
        let offset = text
            .split_inclusive('\n')
            .take(line.saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1);
        Error::Parse {
            offset: offset.min(text.len()),
            line,
            column,
            message: err.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::NotCalibrated => {
                ErrorClass::Usage
            }
            Error::InfiniteThreshold { .. } | Error::NotPositiveDefinite | Error::ZeroMean => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }
}
