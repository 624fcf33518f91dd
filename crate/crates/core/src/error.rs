use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model document: {0}")]
    Schema(String),

    #[error("negative entry {value} in {what}")]
    NegativeEntry { what: String, value: f64 },

    #[error("agent {agent}: adoption + direct selection sums to {sum}, expected 1")]
    RowSum { agent: String, sum: f64 },

    #[error("agent {0} adopts its own choice (p_ii must be 0)")]
    SelfAdoption(String),

    #[error("duplicate entry {0}")]
    Duplicate(String),

    #[error("unknown agent {0:?}")]
    UnknownAgent(String),

    #[error("unknown choice {0:?}")]
    UnknownChoice(String),

    #[error("collective decisiveness fails; no path to a decisive agent from {unreachable:?}")]
    AssumptionViolated { unreachable: Vec<String> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Domain(String),

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("stale factorization cache: {0}")]
    StaleCache(String),

    #[error("instance too large for exhaustive search: {0} subsets")]
    TooLarge(u128),

    #[error("random walk exceeded {0} steps")]
    WalkTooLong(u64),

    #[error("sensitivity shape condition violated: {0}")]
    Shape(String),

    #[error("malformed knowledge item: {0}")]
    Knowledge(String),

    #[error("linear program: {0}")]
    Solver(String),
}
