use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("domain error at s = {s}: {message}")]
    Domain { s: f64, message: String },

    #[error("nonlinearity failed the monotonicity audit: {0}")]
    AuditFailed(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("quadrature did not reach tolerance {tolerance:e} (estimate {estimate:e}) within {budget} subdivisions")]
    Quadrature {
        tolerance: f64,
        estimate: f64,
        budget: usize,
    },

    #[error("envelope too short: {blocks} dyadic blocks, need at least {required}")]
    EnvelopeTooShort { blocks: usize, required: usize },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("iteration diverged at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },

    #[error("integral numerically divergent: {0}")]
    IntegralDivergent(String),

    #[error("schedule search failed: {0}")]
    Schedule(String),

    #[error("certification failed for {bound}: margin {margin:e} at r = {r}, t = {t}, |x| = {x}")]
    Certification {
        bound: String,
        margin: f64,
        r: f64,
        t: f64,
        x: f64,
    },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Stable machine-readable code used by the command line reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownIdentifier { .. } => "unknown_identifier",
            Error::Domain { .. } => "domain",
            Error::AuditFailed(_) => "audit_failed",
            Error::UnknownFamily(_) => "unknown_family",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Quadrature { .. } => "quadrature",
            Error::EnvelopeTooShort { .. } => "envelope_too_short",
            Error::Eigen(_) => "eigen",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Divergence { .. } => "divergence",
            Error::IntegralDivergent(_) => "integral_divergent",
            Error::Schedule(_) => "schedule",
            Error::Certification { .. } => "certification",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
