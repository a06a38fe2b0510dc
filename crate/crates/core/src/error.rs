use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pixel count {0} is not a multiple of 4")]
    LengthNotMultipleOfFour(usize),

    #[error("histogram count overflow in bin {bin}")]
    CountOverflow { bin: usize },

    #[error("histogram count would go negative in bin {bin}")]
    NegativeCount { bin: usize },

    #[error("sub-counter overflow in narrow counter mode")]
    SubCounterOverflow,

    #[error("invalid binning pattern: {reason}")]
    InvalidPattern { reason: &'static str },

    #[error("slot count {slots} out of range [256, {max}] (cap {cap})")]
    SlotCountOutOfRange {
        slots: usize,
        cap: usize,
        max: usize,
    },

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("switch threshold {0} must lie strictly between 0 and 1")]
    InvalidThreshold(f64),

    #[error("invalid worker group configuration: {0}")]
    InvalidGroupConfig(&'static str),

    #[error("invalid pipeline configuration: {0}")]
    InvalidPipelineConfig(&'static str),

    #[error("source exhausted after {0} iterations")]
    SourceExhausted(usize),

    #[error("iteration {iteration} delivered {got} slices, expected {expected}")]
    BatchSizeMismatch {
        iteration: usize,
        got: usize,
        expected: usize,
    },

    #[error("cannot read {path}: {reason}")]
    FileUnreadable { path: String, reason: String },

    #[error("invalid source spec: {0}")]
    SpecInvalid(String),

    #[error("kernel {0} does not produce a histogram")]
    NotAHistogramKernel(&'static str),
}
