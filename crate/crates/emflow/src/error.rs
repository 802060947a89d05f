use thiserror::Error;

use crate::dynamics::Worldline;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the whole crate.
///
/// Variants that correspond to a numerical process failing mid-flight carry
/// enough state to diagnose (and sometimes resume) the attempt, not just a
/// message.
#[derive(Debug, Error)]
pub enum Error {
    /// An event lies outside the validity domain of the metric's chart
    /// (e.g. at or inside the horizon radius of a static black hole chart).
    #[error("event outside chart domain: {0}")]
    ChartDomain(String),

    /// Inconsistent or out-of-range caller input: dimension mismatches,
    /// non-finite coordinates, empty grids, malformed configuration.
    #[error("invalid input: {0}")]
    Config(String),

    /// A tangent vector failed a causal-character requirement
    /// (timelike / future-directed) of the operation.
    #[error("causality violation: {0}")]
    Causality(String),

    /// A matrix that must be invertible for the operation is singular or
    /// too ill-conditioned at the requested point.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Adaptive integration gave up (step size underflow, step budget
    /// exhausted, or the solution left the chart). The trajectory up to
    /// the failure point is attached when at least two samples exist.
    #[error("integration failed at lambda = {lambda}: {reason}")]
    Integration {
        reason: String,
        lambda: f64,
        partial: Option<Box<Worldline>>,
    },

    /// A sampled curve is not a solution of the equation the caller asked
    /// to fit: the least-squares residual exceeded the tolerance.
    #[error(
        "curve does not solve the force equation: best ratio {ratio}, \
         relative residual {residual:.3e} exceeds {tol:.3e}"
    )]
    NotASolution { ratio: f64, residual: f64, tol: f64 },

    /// The two-point shooting solve did not converge within the restart
    /// budget. Carries the best endpoint miss seen, for diagnostics.
    #[error("shooting failed to connect the events: best endpoint miss {best_miss:.3e} after {restarts} restarts")]
    NoConnection { best_miss: f64, restarts: usize },

    /// The variational extremizer stalled before reaching the gradient
    /// tolerance.
    #[error("extremization stalled: gradient norm {gradient_norm:.3e} after {iterations} iterations")]
    NoExtremum { gradient_norm: f64, iterations: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn chart(msg: impl Into<String>) -> Self {
        Error::ChartDomain(msg.into())
    }
}
