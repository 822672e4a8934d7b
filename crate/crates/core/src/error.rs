use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("factorization failed after jitter levels {attempted:?}")]
    Factorization { attempted: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("point out of bounds: {}", describe_violations(.0))]
    OutOfBounds(Vec<BoundViolation>),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("human suggestion pending")]
    Pending,

    #[error("session finished: all {0} batches used")]
    Finished(usize),
}

/// One coordinate of a suggestion that fell outside its box side.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundViolation {
    /// 1-based dimension index.
    pub dim: usize,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

fn describe_violations(v: &[BoundViolation]) -> String {
    v.iter()
        .map(|b| format!("dim {} = {} not in [{}, {}]", b.dim, b.value, b.lo, b.hi))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
