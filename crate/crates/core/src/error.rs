use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid needs {required} points, budget is {budget}")]
    GridTooLarge { required: u128, budget: u128 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{particles}! permutations exceed the budget of {budget} particles")]
    FactorialBudget { particles: usize, budget: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("shifted operator is not positive on the complement (curvature {curvature:.3e})")]
    Indefinite { curvature: f64 },

    #[error("spectral gap condition failed: {0}")]
    Gap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("incomplete input: {0}")]
    Incomplete(String),

    #[error("fixed-point iteration failed to contract: trace {trace:?}")]
    NonContraction { trace: Vec<f64> },

    #[error("interaction energy changes sign in the fit window (repulsive regime at abscissa {abscissa})")]
    Repulsive { abscissa: f64 },
}
