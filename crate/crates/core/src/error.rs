use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid mixing measure: {0}")]
    InvalidMixture(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("region {region} received no Monte-Carlo mass")]
    EmptyMonteCarloRegion { region: usize },

    #[error("requirement is unbounded: {0}")]
    Unbounded(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("transport solver did not converge after {0} pivots")]
    TransportDiverged(usize),
}
