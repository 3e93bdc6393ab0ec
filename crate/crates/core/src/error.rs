use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid symbol {symbol} (alphabet has {size} symbols)")]
    InvalidSymbol { symbol: usize, size: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("enumeration limit exceeded: {paths} paths > {limit}")]
    EnumerationLimit { paths: f64, limit: u64 },

    #[error("label is infeasible for the given posteriors: {0}")]
    Infeasible(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid label: {0}")]
    Label(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("incompatible checkpoint: {0}")]
    Compatibility(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// True for failures of the numerics or of training itself, as opposed to
    /// bad input, bad usage or unreadable files.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Training(_) | Error::State(_) => true,
            Error::Sample { source, .. } => source.is_internal(),
            _ => false,
        }
    }
}
