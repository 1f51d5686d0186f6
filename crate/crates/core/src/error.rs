use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("no value inside {bounds:?} after {draws} draws for the {channel} channel")]
    DistributionInfeasible {
        channel: &'static str,
        bounds: (u32, u32),
        draws: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient history: need at least {required} cycles, got {available}")]
    InsufficientHistory { required: usize, available: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("singular design: column {column} is linearly dependent on the intercept and earlier columns")]
    SingularDesign { column: usize },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("parse error at line {line}, field `{field}`: {reason}")]
    Parse {
        line: usize,
        field: String,
        reason: String,
    },
}
