use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("r = {r} lies outside the profile domain [0, {upper}]")]
    Domain { r: f64, upper: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver did not converge (failed at index {index})")]
    NoConvergence { index: usize },

    #[error("could not bracket root n = {n} of the Bessel function of order l + 1/2, l = {l}")]
    RootBracket { l: usize, n: usize },

    #[error("quadrature did not converge: successive panel doublings differ by {difference:e}")]
    Quadrature { difference: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure traces back to the caller's input rather than to
    /// the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Domain { .. } | Error::Precondition(_) | Error::Json(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Domain { .. } => "domain",
            Error::NonFinite(_) => "non_finite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::RootBracket { .. } => "root_bracket",
            Error::Quadrature { .. } => "quadrature",
            Error::Precondition(_) => "precondition",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
