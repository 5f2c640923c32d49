use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {n} exceeds the enumeration cap {cap} (set SUBMODTREE_ENUM_CAP to raise it)")]
    DimensionTooLarge { n: usize, cap: usize },

    #[error("rank {rank} out of range for weight-{weight} strings of length {n} (there are {count})")]
    RankOutOfRange { n: usize, weight: usize, rank: u64, count: u64 },

    #[error("invalid family spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("second derivative needs two distinct coordinates, got {0} twice")]
    SameCoordinate(usize),

    #[error("candidate budget exceeded: {needed} coefficients requested, limit {limit}")]
    BudgetExceeded { needed: u64, limit: u64 },

    #[error("tree has a non-constant leaf")]
    NonConstantLeaf,

    #[error("value {value} at point {point} is not a multiple of 1/{k}")]
    NonDiscreteRange { value: f64, point: String, k: u32 },

    #[error("sample is empty")]
    EmptySample,

    #[error("no candidate parity found")]
    NoCandidate,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
