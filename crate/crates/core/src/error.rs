use thiserror::Error;

use crate::algorithm::RunTrace;
use crate::geometry::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Dykstra iteration did not reach a feasible resting point within the
    /// sweep cap, as happens for disjoint bodies.
    #[error("projection did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    Convergence {
        iterate: Point,
        residual: f64,
        sweeps: usize,
    },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    /// A run stopped early; the rounds completed so far are kept for inspection.
    #[error("run aborted at round {round}: {source}")]
    RunAborted {
        round: usize,
        partial: Box<RunTrace>,
        #[source]
        source: Box<Error>,
    },

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle did not converge after {iterations} iterations (residual {residual:.3e})")]
    OracleNonConvergence {
        best: Point,
        value: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("grid search found no feasible point at resolution {0}")]
    NoFeasibleGridPoint(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
