//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccumError {
    #[error("invalid ordinal: {0}")]
    InvalidOrdinal(String),
    #[error("ordinal parse error at position {pos}: {msg}")]
    OrdinalParse { pos: usize, msg: String },
    #[error("ordinal tower height {height} exceeds the limit {limit}")]
    HeightExceeded { height: usize, limit: usize },
    #[error("{0} is not a limit ordinal")]
    NotLimit(String),
    #[error("invalid rational: {0}")]
    InvalidRational(String),
    #[error("indeterminate limit: {0}")]
    IndeterminateLimit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid point address: {0}")]
    InvalidAddress(String),
    #[error("the class S(0, a) with a > 0 is empty")]
    EmptyClass,
    #[error("order of accumulation could not be certified: {0}")]
    Uncertified(String),
    #[error("blow-up distance condition violated at index {index}: {detail}")]
    DistanceCondition { index: usize, detail: String },
    #[error("periodic orbit search failed: {0}")]
    OrbitSearch(String),
    #[error("realization failed: {0}")]
    Realization(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, AccumError>;

impl From<serde_json::Error> for AccumError {
    fn from(e: serde_json::Error) -> Self {
        AccumError::Serde(e.to_string())
    }
}

impl AccumError {
    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            AccumError::InvalidOrdinal(_) => "invalid_ordinal",
            AccumError::OrdinalParse { .. } => "ordinal_parse",
            AccumError::HeightExceeded { .. } => "height_exceeded",
            AccumError::NotLimit(_) => "not_limit",
            AccumError::InvalidRational(_) => "invalid_rational",
            AccumError::IndeterminateLimit(_) => "indeterminate_limit",
            AccumError::InvalidArgument(_) => "invalid_argument",
            AccumError::InvalidModel(_) => "invalid_model",
            AccumError::InvalidAddress(_) => "invalid_address",
            AccumError::EmptyClass => "empty_class",
            AccumError::Uncertified(_) => "uncertified",
            AccumError::DistanceCondition { .. } => "distance_condition",
            AccumError::OrbitSearch(_) => "orbit_search",
            AccumError::Realization(_) => "realization",
            AccumError::Serde(_) => "serde",
        }
    }
}
