use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent input (dimension mismatch, bad counts, bad spec strings).
    #[error("input error: {0}")]
    Input(String),

    /// A numerical routine failed to reach its target accuracy.
    #[error("numerical error: {what} (achieved tolerance {achieved:.3e})")]
    Numerical { what: String, achieved: f64 },

    /// The requested combination is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A data file could not be parsed.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(what: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            achieved,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
