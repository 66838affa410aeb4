use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model validation failed: {0}")]
    InvalidModel(String),
    #[error("chain is not irreducible: {num_recurrent_classes} recurrent classes")]
    NotIrreducible { num_recurrent_classes: usize },
    #[error("stationary distribution has a zero entry at state {state}")]
    ZeroStationaryMass { state: usize },
    #[error("branching factor {b} exceeds number of states {s}")]
    InvalidBranching { b: usize, s: usize },
    #[error("reversible construction failed detailed balance after {redraws} redraws")]
    ReversibilityNotAchieved { redraws: usize },
    #[error("visit count is zero at state {state}")]
    DegenerateCount { state: usize },
    #[error("competitive ratio needs a positive asymptotic optimum, got {0}")]
    NonPositiveOptimum(f64),
    #[error("spectral gap {0} below machine-safe threshold")]
    GapTooSmall(f64),
    #[error("budget {n} too small (needs n > 1/eta_min = {threshold})")]
    BudgetTooSmall { n: usize, threshold: f64 },
    #[error("zero state marginal at state {state}")]
    ZeroMarginal { state: usize },
    #[error("zero visit count in optimistic gradient at state {state}")]
    ZeroCount { state: usize },
    #[error("problem infeasible: {0}")]
    Infeasible(String),
    #[error("spectral norm at or above one; mixing proxy undefined")]
    NormAtOne,
    #[error("all variance estimates are zero; slack schedule undefined")]
    DegenerateVariances,
    #[error("maximum iterations ({0}) exceeded")]
    MaxItersExceeded(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
