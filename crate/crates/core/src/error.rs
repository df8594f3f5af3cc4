use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the operation's domain (inverse of zero, bad `k`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-exact polynomial division: {0}")]
    NonExactDivision(String),

    #[error("non-integral coefficient at index {index} in Newton reconstruction")]
    NonIntegralCoefficient { index: usize },

    #[error("count table inconsistent with L-polynomial: {0}")]
    CountInconsistency(String),

    #[error("insufficient series precision: {0}")]
    InsufficientPrecision(String),

    #[error("malformed shift list: {0}")]
    MalformedShift(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A Kani-Rosen identity failed to divide exactly.
    #[error("relation falsified: {0}")]
    RelationFalsified(String),

    #[error("no decomposition brings leaves under the genus bound: {0}")]
    NoDecomposition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable tag used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NonExactDivision(_) => "non_exact_division",
            Error::NonIntegralCoefficient { .. } => "non_integral_coefficient",
            Error::CountInconsistency(_) => "count_inconsistency",
            Error::InsufficientPrecision(_) => "insufficient_precision",
            Error::MalformedShift(_) => "malformed_shift",
            Error::Precondition(_) => "precondition",
            Error::RelationFalsified(_) => "relation_falsified",
            Error::NoDecomposition(_) => "no_decomposition",
            Error::Parse(_) => "parse",
            Error::Cache(_) => "cache",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Internal(_) => "internal",
        }
    }
}
