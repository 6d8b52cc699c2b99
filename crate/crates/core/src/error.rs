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

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Manifest(String),

    #[error("store at {0} already exists (pass overwrite to replace it)")]
    StoreExists(PathBuf),

    #[error("column '{column}': file holds {actual} bytes, expected {expected}")]
    ColumnLength {
        column: String,
        expected: u64,
        actual: u64,
    },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("column '{0}' already exists")]
    DuplicateColumn(String),

    #[error("chunk {index} out of range (store has {count} chunks)")]
    ChunkOutOfRange { index: usize, count: usize },

    #[error("store is locked for writing ({0} exists)")]
    Locked(PathBuf),

    #[error("expression syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown function '{name}' at position {position}")]
    UnknownFunction { name: String, position: usize },

    #[error("row {row}: {message} in `{expr}`")]
    Domain {
        row: u64,
        expr: String,
        message: String,
    },

    #[error("invalid bin specification: {0}")]
    BinSpec(String),

    #[error("NaN value in column '{0}'")]
    NanValue(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid level {0}: probability levels must lie strictly between 0 and 1")]
    Level(f64),

    #[error("{0}")]
    Region(String),

    #[error("grid document: {0}")]
    Document(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
