use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a group needs at least one cyclic factor")]
    EmptyFactors,

    #[error("cyclic factor #{index} has order zero")]
    ZeroFactor { index: usize },

    #[error("expected {expected} coordinates, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("coordinate {value} is out of range for a cyclic factor of order {modulus}")]
    CoordinateOutOfRange { value: usize, modulus: usize },

    #[error("element rank {rank} is out of range for a group of order {order}")]
    RankOutOfRange { rank: usize, order: usize },

    #[error("operands live on different groups")]
    GroupMismatch,

    #[error("value table has length {got}, group order is {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("not a measure: {0}")]
    NotAMeasure(String),

    #[error("set must be nonempty")]
    EmptySet,

    #[error("normalizing mass is zero")]
    ZeroMass,

    #[error("{0} is not prime")]
    NotPrime(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    /// Raised when a search fails although the underlying result guarantees
    /// success; always indicates a bug.
    #[error("internal invariant violated: {0}")]
    BugTrap(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
