use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: &'static str },

    #[error("division by zero: {0} must be nonzero")]
    DivisionByZero(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("probe set must not be empty")]
    EmptyProbeSet,

    #[error("probe #{index} at (x={x}, t={t}) lies outside the domain")]
    ProbeOutsideDomain { index: usize, x: f64, t: f64 },

    #[error("invalid bounds for `{name}`: {reason}")]
    InvalidBounds { name: &'static str, reason: &'static str },

    #[error("stencil at index {index} leaves a vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("at least 3 nodes are required, got {nx}")]
    TooFewNodes { nx: usize },

    #[error("singular system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("non-finite temperature after step {step}")]
    NonFinite { step: usize },

    #[error("forward cache does not match the network shape")]
    CacheMismatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {need} pairs, got {got}")]
    InsufficientPairs { got: usize, need: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
