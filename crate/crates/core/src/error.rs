use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SabrError {
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("series for {what} did not converge within {iterations} terms")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("loss of precision in {what}")]
    LossOfPrecision { what: &'static str },

    #[error("overflow evaluating {what}")]
    Overflow { what: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },

    #[error("missing fixture for case {case} at T={maturity}, K={strike}")]
    MissingFixture {
        case: String,
        maturity: f64,
        strike: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl SabrError {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        SabrError::Domain { what, value }
    }
}

impl From<std::io::Error> for SabrError {
    fn from(err: std::io::Error) -> Self {
        SabrError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SabrError>;
