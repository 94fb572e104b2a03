use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths of inputs do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// Input violates a structural invariant (e.g. weights off the simplex).
    #[error("invalid structure: {0}")]
    Structure(String),
    /// Caller asked for something the operation cannot do (empty data, bad range).
    #[error("usage error: {0}")]
    Usage(String),
    /// Configuration failed validation; `path` names the offending key.
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    /// A binary or JSON artifact could not be decoded.
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
