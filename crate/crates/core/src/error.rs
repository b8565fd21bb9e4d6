use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input record; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("population is empty")]
    EmptyPopulation,

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    /// Inputs outside the domain of a formula.
    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// A closed form went negative by more than rounding can explain.
    #[error("{op}: variance evaluated to {value:e}, beyond rounding tolerance")]
    NegativeVariance { op: &'static str, value: f64 },

    #[error("enumeration needs {count} configurations, limit is {limit}")]
    TooManyConfigurations { count: u128, limit: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { op, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
