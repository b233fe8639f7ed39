//! Error type shared by all simulator modules.

/// Errors surfaced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("sequence does not fit the grid: {0}")]
    Overflow(String),

    #[error("signal has no energy on occupied bins")]
    ZeroEnergy,

    #[error("cyclic shift out of range: {0}")]
    ShiftOutOfRange(String),

    #[error("ambiguous root detection: {0}")]
    AmbiguousDetection(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate search grid: {0}")]
    DegenerateGrid(String),

    #[error("comb offset collision: both users mapped to offset {0}")]
    CombCollision(usize),

    #[error("config validation failed: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
