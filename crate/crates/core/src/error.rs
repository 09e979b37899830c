use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented bound (rate ranges, step sizes, shapes).
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed-form identity that must hold by construction did not.
    #[error("internal assertion failed: {0}")]
    Assertion(String),

    /// The criterion could not be evaluated at a probe point.
    #[error("criterion evaluation failed at coordinate {coordinate:?}: {message}")]
    Evaluation {
        coordinate: Option<usize>,
        message: String,
    },

    /// A capability (gradient or hessian) was requested but not provided.
    #[error("criterion does not provide {0}")]
    MissingCapability(&'static str),

    /// A matrix that must be inverted is numerically singular.
    #[error("singular matrix (condition estimate {condition:.3e}){}", .step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Singular { condition: f64, step: Option<usize> },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations: {message}")]
    NoConvergence { iterations: usize, message: String },

    /// Invalid configuration or malformed input file.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn eval(coordinate: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Evaluation {
            coordinate,
            message: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
