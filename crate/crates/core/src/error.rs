use thiserror::Error;

/// Errors produced by graph construction, the solvers and the evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A value outside the domain of a map (nonpositive entry, negative exponent base, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A map produced a zero where the pipeline requires strict positivity.
    #[error("degenerate image: {0}")]
    Degeneracy(String),

    /// The instance does not satisfy a solver precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Target mass cannot be reached under the prior's topology.
    #[error("infeasible instance: {0}")]
    Infeasible(String),

    /// An iteration did not converge; carries the residual history.
    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },

    /// A computation would exceed a configured resource cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Internal consistency failure, indicates a solver bug.
    #[error("internal consistency error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, BridgeError>;
