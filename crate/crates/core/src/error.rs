use alloc::string::String;

/// Errors raised by the model, samplers and summaries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("label {label} outside 0..{n_groups}")]
    Label { label: usize, n_groups: usize },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("degenerate sampling distribution at time {time}")]
    DegenerateDistribution { time: usize },
    #[error("enumeration of {size} label sequences exceeds the limit of {limit}")]
    EnumerationTooLarge { size: u128, limit: u128 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("undefined statistic: {0}")]
    Undefined(String),
}

pub type Result<T> = core::result::Result<T, Error>;
