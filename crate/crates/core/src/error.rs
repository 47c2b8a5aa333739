use thiserror::Error;

/// Errors raised by the mining engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {0} has the wrong number of fields")]
    ArityMismatch(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("batch contains no rows")]
    EmptyBatch,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("value id {value} is not in the domain of attribute {attr}")]
    UnknownValue { attr: usize, value: u32 },

    #[error("target and conditional attribute are the same ({0})")]
    SameAttribute(usize),

    #[error("entropy of an empty distribution (total count is zero)")]
    ZeroTotal,

    #[error("invalid log base {0}")]
    InvalidLogBase(f64),

    #[error("invalid delta: {0}")]
    InvalidDelta(String),

    #[error("inconsistent delta: conditional count {expected} but column sums to {actual}")]
    InconsistentDelta { expected: u64, actual: u64 },

    #[error("no prior conditional entropy for an existing conditional value")]
    MissingPrior,

    #[error("batch does not match the state: {0}")]
    InvalidBatch(String),

    #[error("missing CSV header")]
    MissingHeader,

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("unsupported snapshot version {0}")]
    VersionMismatch(u64),

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("bad generator config: {0}")]
    BadConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("snapshot JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
