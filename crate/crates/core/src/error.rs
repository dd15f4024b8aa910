use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("phase generator is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("solver did not converge after {sweeps} sweeps (last residual {residual:e})")]
    NotConverged { residual: f64, sweeps: usize },

    #[error("{what} = {value} out of range 0..={max}")]
    OutOfRange { what: &'static str, value: usize, max: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "explicit matrix needs about {needed_mb} MB for {states} states, over the {budget_mb} MB budget; \
         use the matrix-free operator instead"
    )]
    MemoryBudget { states: usize, needed_mb: usize, budget_mb: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
