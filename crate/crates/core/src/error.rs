use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what}, line {line}: {message}")]
    Parse { what: String, line: usize, message: String },

    #[error("annotation on line {line} references a missing token: {record}")]
    DanglingAnnotation { line: usize, record: String },

    #[error("annotation on line {line} conflicts with an earlier sense for the same token: {record}")]
    ConflictingAnnotation { line: usize, record: String },

    #[error("embeddings, row {row}: expected {expected} values, found {found}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },

    #[error("word not in vocabulary: {0}")]
    UnknownWord(String),

    #[error("zero vector for `{0}`")]
    ZeroVector(String),

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("invalid edge ({from}, {to}, {weight}): {reason}")]
    InvalidEdge {
        from: usize,
        to: usize,
        weight: f64,
        reason: &'static str,
    },

    #[error("no predictions for occurrence {0}")]
    MissingPredictions(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot score an empty partition")]
    EmptyPartition,

    #[error("duplicate item `{0}` in partition")]
    DuplicateItem(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
