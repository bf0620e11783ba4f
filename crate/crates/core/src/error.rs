//! Crate-wide error type.

use crate::solvers::StepLedger;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A point lies outside the domain of the reference function or its
    /// gradient (e.g. a non-positive entry under the entropy geometry).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The numeric inner solver for the prox subproblem did not reach its
    /// tolerance within the iteration cap.
    #[error("inner prox solver stalled: residual {residual:.3e} after {iterations} iterations")]
    InnerSolver { residual: f64, iterations: usize },

    /// The stopping criterion was met without a single productive step, so
    /// the averaged output is undefined.
    #[error("no productive steps after {iterations} iterations ({nonproductive} non-productive)")]
    NoProductiveSteps {
        iterations: usize,
        nonproductive: usize,
    },

    /// The iteration budget ran out before the stopping criterion held.
    /// Carries the ledger accumulated so far for post-mortem inspection.
    #[error("iteration budget {budget} exhausted before the stopping criterion held")]
    Budget {
        budget: usize,
        ledger: Box<StepLedger>,
    },

    #[error("infeasible instance: {0}")]
    Infeasible(String),
}
