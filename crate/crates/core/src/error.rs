use thiserror::Error;

/// Errors raised by models, codebooks, NTS runs and the rate-distortion oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NtsError {
    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("row {row} sums to {sum} (expected 1)")]
    RowSum { row: usize, sum: f64 },

    #[error("invalid probability entry {value} at ({row}, {col})")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("chain has no unique stationary distribution: {0}")]
    NonErgodic(String),

    #[error("word length {len} is too short (need at least {min})")]
    Length { len: usize, min: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("word length {len} is not divisible by block order {order}")]
    Divisibility { len: usize, order: usize },

    #[error("letter {letter} out of range for alphabet of size {size}")]
    LetterOutOfRange { letter: usize, size: usize },

    #[error("no d-matching codeword within the first {cap} codewords")]
    Exhausted { cap: u64 },

    #[error("iteration {iteration}, match {matched}: no d-matching codeword within the first {cap} codewords")]
    ExhaustedAt {
        iteration: usize,
        matched: usize,
        cap: u64,
    },

    #[error("adopted type has zero entries at iteration {iteration}")]
    DegenerateType { iteration: usize },

    #[error("statistical depth K must be at least 1 (got {0})")]
    InvalidK(usize),

    #[error("state {0} was never visited and no smoothing was requested")]
    EmptyRow(usize),

    #[error("distortion {d} is outside the attainable range (minimum {d_min})")]
    Range { d: f64, d_min: f64 },

    #[error("distortion {d} is infeasible for the sub-stream allocation (minimum {d_min})")]
    InfeasibleDistortion { d: f64, d_min: f64 },

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("empty sub-stream decomposition")]
    EmptyDecomposition,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid distortion table: {0}")]
    InvalidDistortion(String),
}

pub type Result<T> = std::result::Result<T, NtsError>;
