use thiserror::Error;

/// Errors raised by the market models and the equilibrium solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("infeasible allocation for firm {firm}: {reason}")]
    Infeasible { firm: usize, reason: String },

    #[error("best-response iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("{0}")]
    Unsupported(String),
}
