use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite amplitude at site {site}")]
    NonFinite { site: i64 },

    #[error("dimension mismatch: expected {expected} sites, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("norm exponents out of order: p = {p} must not exceed q = {q}")]
    ParameterOrder { p: f64, q: f64 },

    #[error("invalid exponent {0}: expected a value in [1, inf]")]
    InvalidExponent(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A hypothesis of a bound or estimate does not hold for the supplied parameters.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid radius: rho1 = {rho1} must exceed the limit radius {limit}")]
    InvalidRadius { rho1: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// `line` is 1-based; 0 means the problem is not tied to one line.
    #[error("config error{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

impl Error {
    pub fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    /// True for errors that stem from violated hypotheses.
    pub fn is_hypothesis(&self) -> bool {
        matches!(self, Error::Hypothesis(_) | Error::InvalidRadius { .. })
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
