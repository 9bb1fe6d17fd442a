use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {value}")]
    ParameterDomain { name: &'static str, value: f64 },

    #[error("coordinates must be strictly increasing (index {index})")]
    NonIncreasingCoords { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (block {block})")]
    NotPositiveDefinite { block: usize },

    #[error("structured likelihood path unavailable: {0}")]
    StructuredPathUnavailable(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("dense covariance of size {n} exceeds the cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("lateral position {z} m lies outside the deck [{min}, {max}]")]
    OutsideDeck { z: f64, min: f64, max: f64 },

    #[error("likelihood is -inf everywhere sampled; no valid region found")]
    NoValidRegion,

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("invalid model shorthand `{0}`")]
    Shorthand(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
