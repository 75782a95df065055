use thiserror::Error;

/// Errors raised by the rate models, oracles, and configuration loaders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model validity violated: {0}")]
    ModelValidity(String),

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("secure rate is already zero at the lower search edge {lower}")]
    NoCoverage { lower: f64 },

    #[error("secure rate is still positive at the upper search edge {upper}")]
    NoCutoffInBox { upper: f64 },

    #[error("sector decomposition failed: residual {residual:e} exceeds {tolerance:e}")]
    Decomposition { residual: f64, tolerance: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
