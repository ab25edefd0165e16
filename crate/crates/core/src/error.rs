use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("alpha must be negative for the Gibbs integral to converge, got {0}")]
    AlphaDomain(f64),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("integrability check failed: {0}")]
    Integrability(String),

    #[error("could not bracket a root: {0}")]
    Bracket(String),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("maximum-entropy problem is infeasible: {0}")]
    Infeasible(String),

    #[error("constraints inactive, entropy unbounded: {0}")]
    Divergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical routine (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_)
                | Error::Integrability(_)
                | Error::Bracket(_)
                | Error::Infeasible(_)
                | Error::Divergence(_)
                | Error::Degenerate(_)
                | Error::Hypothesis(_)
        )
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
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
