use thiserror::Error;

/// Errors surfaced by the solvers, loaders and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data (problem file, price history, config) is malformed.
    #[error("data error: {0}")]
    Data(String),
    /// A broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True when the error originates from bad input data rather than bad arguments.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Data(_) | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
