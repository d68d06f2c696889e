use thiserror::Error;

/// Errors produced by the clustering engine and its oracle.
#[derive(Debug, Error)]
pub enum Error {
    /// An observation or parameter vector had the wrong number of coordinates.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value such as a schedule exponent or a K_max range is unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// The sum-of-squares curve is flat between the first and last model.
    #[error("degenerate sum-of-squares curve: {0}")]
    DegenerateCurve(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short, stable category name used in machine-readable error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::InvalidInput(_) => "input",
            Error::Config(_) => "config",
            Error::DegenerateCurve(_) => "degenerate",
            Error::Serde(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
