use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("state dimension mismatch: {scheme} expects {expected}, got {got}")]
    DimensionMismatch {
        scheme: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("per-cycle sequence has {len} entries, cycle {cycle} requested")]
    SequenceExhausted { cycle: usize, len: usize },

    #[error("B = {bits} fractional bits is below the required {required}")]
    InsufficientPrecision { bits: u32, required: u32 },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            value,
            range: range.into(),
        }
    }
}
