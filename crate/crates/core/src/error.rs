use thiserror::Error;

/// Errors raised by the modeling and simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("slot index {index} out of range 1..={num_slots}")]
    SlotOutOfRange { index: usize, num_slots: usize },

    #[error("operation requires an M2M arrival model")]
    ExpectedM2m,

    #[error("operation requires an H2H arrival model")]
    ExpectedH2h,

    #[error("transition requires origin < destination (origin {origin}, destination {destination})")]
    InvalidTransition { origin: usize, destination: usize },

    #[error("preamble pool must contain at least one preamble")]
    EmptyPool,

    #[error("split parameter {value} must satisfy 0 < {name} < {total}")]
    SplitOutOfRange {
        name: &'static str,
        value: u32,
        total: u32,
    },

    #[error("transition matrix spans {matrix} slots but arrivals cover {arrivals}")]
    DimensionMismatch { matrix: usize, arrivals: usize },

    #[error("retry order {order} out of range 2..={max_attempts}")]
    RetryOrderOutOfRange { order: usize, max_attempts: usize },

    #[error("grid contains no activated arrivals")]
    EmptyGrid,

    #[error("no successes; metric undefined")]
    NoSuccesses,

    #[error("enumeration spans {states} assignments, above the {bound} bound")]
    EnumerationBound { states: u128, bound: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
