use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed book file: {message}")]
    BookFormat { path: PathBuf, message: String },

    #[error("{path}: page {page}: {message}")]
    PageFormat {
        path: PathBuf,
        page: usize,
        message: String,
    },

    #[error("invalid book {id}: {message}")]
    InvalidBook { id: String, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid enumeration range {start}-{end}: the end must be greater than the start")]
    InvalidRange { start: u32, end: u32 },

    #[error("not a canonical enumeration: {0:?}")]
    NotCanonical(String),

    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("synthesis failed: {0}")]
    Synth(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss is {loss} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: bad matrix file: {message}")]
    MatrixFormat { path: PathBuf, message: String },

    #[error("bad model file: {0}")]
    ModelFormat(String),

    #[error("{path}:{line}: {message}")]
    Tsv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown relationship label {0:?}")]
    UnknownLabel(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
