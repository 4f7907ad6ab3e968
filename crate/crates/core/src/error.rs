use thiserror::Error;

/// Errors produced by the simulation and verification toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("m(t) search cap exceeded: tau reached {reached} at index {cap} without exceeding t={t}")]
    SearchCapExceeded { t: f64, cap: usize, reached: f64 },

    #[error("nonpositive step size {value} at index {index}")]
    NonPositiveStep { index: usize, value: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("no nesting threshold below search cap {cap}; violation at n={violating_n}")]
    NoNestingThreshold { cap: usize, violating_n: usize },

    #[error("outside Λ domain")]
    OutsideLambdaDomain,

    #[error("numerical blowup at step k={k}")]
    NumericalBlowup { k: usize },

    #[error("state escaped C ∪ D at (k={k}, j={j})")]
    EscapedFlowJumpSets { k: usize, j: usize },

    #[error("Zeno-like jump livelock: more than {max} consecutive jumps at k={k}")]
    JumpLivelock { k: usize, max: usize },

    #[error("chain search budget of {budget} legs exhausted; best gap {best_gap}")]
    BudgetExhausted { budget: usize, best_gap: f64 },

    #[error("minimizer set unavailable")]
    MinimizerSetUnavailable,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
