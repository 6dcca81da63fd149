use thiserror::Error;

/// Errors shared across the solver modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("queue is unstable: traffic intensity rho = {0} >= 1")]
    Unstable(f64),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("rate-row iteration did not converge after {max_l} schedule steps")]
    NoConvergence { max_l: usize },

    #[error("closed form requires c = 2, got c = {0}")]
    WrongServerCount(usize),

    #[error("truncation point would exceed the hard cap of {cap} levels")]
    TruncationOverflow { cap: usize },

    #[error("boundary vector residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    BoundaryResidualTooLarge { residual: f64, tol: f64 },

    #[error("linear system is singular or has a degenerate null space")]
    SingularSystem,

    #[error("oracle size budget exceeded: {size} states > {budget}")]
    SizeBudgetExceeded { size: usize, budget: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
