//! The discrete-time chain over `(s, x, c)`: factors, operators and the stationary solve.

mod config;
mod factors;
mod operator;
mod solver;
mod state;

pub use config::{SolverMethod, SolverOptions, SystemConfig};
pub use factors::{
    connection_transition_pmf, queue_transition_kernel, ConnectionDynamics, QueueKernel, WindowPmf,
    CONNECTION_ARRIVAL_TAIL, DEPARTURE_TAIL,
};
pub use operator::{assemble, ModelOperator, TransitionMatrix, TransitionOperator};
pub use solver::{residual, solve, solve_with, Partition, SteadyState, MAX_DIRECT_STATES};
pub use state::{Axis, StateSpace};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Builds the factored operator for `config` and computes its stationary distribution.
///
/// The explicit sparse matrix is used when it fits `solver.memory_budget_mb`, the
/// matrix-free operator otherwise; both give the same entries.
pub fn solve_model(config: &SystemConfig) -> Result<(ModelOperator, SteadyState)> {
    solve_model_with(config, Execution::default())
}

pub fn solve_model_with(config: &SystemConfig, exec: Execution) -> Result<(ModelOperator, SteadyState)> {
    let op = ModelOperator::build_with(config, exec)?;
    let space = *op.space();
    let block_of = move |i: usize| space.block_of(i);
    let partition = Partition { blocks: space.block_count(), block_of: &block_of };
    let steady = match TransitionMatrix::materialize(&op, config.solver.memory_budget_mb, exec) {
        Ok(matrix) => solve_with(&matrix, &config.solver, Some(&partition), exec)?,
        Err(Error::MemoryBudget { .. }) => solve_with(&op, &config.solver, Some(&partition), exec)?,
        Err(e) => return Err(e),
    };
    Ok((op, steady))
}
