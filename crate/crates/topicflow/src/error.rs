//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A record in an input file could not be parsed.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Input parsed but violates a structural requirement.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied option or parameter is out of range or unknown.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input values are internally inconsistent (clock skew, bad counts).
    #[error("data error: {0}")]
    Data(String),

    /// A model could not be fitted or applied.
    #[error("model error: {0}")]
    Model(String),

    /// Vector lengths disagree.
    #[error("dimension error: expected length {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// Two per-slot series do not share a slot calendar.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// Derived quantities contradict each other.
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A series carries no usable mass.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// Synthetic generation failed after bounded retries.
    #[error("generation error: {0}")]
    Generation(String),

    /// A quantity left its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short category tag used by the CLI when reporting failures.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Model(_) => "model",
            Error::Dimension { .. } => "dimension",
            Error::Alignment(_) => "alignment",
            Error::Consistency(_) => "consistency",
            Error::DegenerateSeries(_) => "degenerate",
            Error::Generation(_) => "generation",
            Error::Domain(_) => "domain",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
