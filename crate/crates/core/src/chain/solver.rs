//! Stationary distribution of a row-stochastic operator.
//!
//! The contract is the residual `||pi P - pi||_1 <= tolerance`, checked before every
//! sweep. Sweeps are Gauss–Seidel (in place, column gathers) or power steps (each
//! entry gathered independently, so any thread count gives identical bits). When a
//! block partition is supplied, each sweep is preceded by an aggregation /
//! disaggregation step: the chain lumped onto the blocks is solved exactly and the
//! iterate is rescaled block by block. Gauss–Seidel then works block by block too,
//! solving each diagonal block exactly against the inflow from the others (blocks
//! small enough for a dense LU; point updates otherwise). For this model the blocks
//! are `(c, s)`, the slow coordinates, so the fast queue dynamics are handled exactly
//! and the iteration only has to resolve the weak coupling between blocks.

use crate::chain::config::{SolverMethod, SolverOptions};
use crate::chain::operator::TransitionOperator;
use crate::error::{Error, Result};
use crate::exec::{fill_indexed, map_range, Execution};
use crate::linalg::{gth_stationary, Dense};
use nalgebra::{DMatrix, DVector, Dyn, LU};

/// Largest block factored densely by block Gauss–Seidel.
const MAX_DENSE_BLOCK: usize = 2_048;

/// Largest chain handled by the dense direct method.
pub const MAX_DIRECT_STATES: usize = 3_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub pi: Vec<f64>,
    /// `||pi P - pi||_1` of the returned vector.
    pub residual: f64,
    pub sweeps_used: usize,
}

/// A grouping of states into aggregation blocks.
pub struct Partition<'a> {
    pub blocks: usize,
    pub block_of: &'a (dyn Fn(usize) -> usize + Sync),
}

pub fn solve<O: TransitionOperator>(op: &O, options: &SolverOptions) -> Result<SteadyState> {
    solve_with(op, options, None, Execution::default())
}

pub fn solve_with<O: TransitionOperator>(
    op: &O,
    options: &SolverOptions,
    partition: Option<&Partition<'_>>,
    exec: Execution,
) -> Result<SteadyState> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::InvalidParams("empty operator".into()));
    }
    if options.method == SolverMethod::Direct {
        return solve_direct(op, options);
    }
    let partition = partition.filter(|_| options.aggregate);
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let blocks = match (options.method, partition) {
        (SolverMethod::GaussSeidel, Some(p)) => BlockFactors::build(op, p, options.memory_budget_mb, exec),
        _ => None,
    };
    let mut sweeps = 0usize;
    loop {
        let pass = row_pass(op, &pi, partition);
        if pass.residual <= options.tolerance {
            return Ok(SteadyState { pi, residual: pass.residual, sweeps_used: sweeps });
        }
        if sweeps >= options.max_sweeps {
            return Err(Error::NotConverged { residual: pass.residual, sweeps });
        }
        if let (Some(p), Some(agg)) = (partition, pass.aggregated) {
            disaggregate(&mut pi, p, &agg);
        }
        match options.method {
            SolverMethod::GaussSeidel => match &blocks {
                Some(b) => b.sweep(op, &mut pi),
                None => gauss_seidel_sweep(op, &mut pi),
            },
            SolverMethod::Power => {
                power_step(op, &pi, &mut next, exec);
                std::mem::swap(&mut pi, &mut next);
            }
            SolverMethod::Direct => unreachable!(),
        }
        normalize(&mut pi)?;
        sweeps += 1;
    }
}

/// L1 residual of `pi` under `op`.
pub fn residual<O: TransitionOperator>(op: &O, pi: &[f64]) -> f64 {
    row_pass(op, pi, None).residual
}

struct RowPass {
    residual: f64,
    aggregated: Option<(Dense, Vec<f64>)>,
}

// One sequential scatter pass: computes pi P (for the residual) and, with a partition,
// the lumped block matrix weighted by the current iterate.
fn row_pass<O: TransitionOperator>(op: &O, pi: &[f64], partition: Option<&Partition<'_>>) -> RowPass {
    let n = op.dim();
    let mut y = vec![0.0; n];
    let aggregated = match partition {
        None => {
            for (i, &p) in pi.iter().enumerate() {
                if p != 0.0 {
                    op.for_each_in_row(i, |j, v| y[j] += p * v);
                }
            }
            None
        }
        Some(part) => {
            let mut mass = vec![0.0; part.blocks];
            let mut size = vec![0usize; part.blocks];
            for (i, &p) in pi.iter().enumerate() {
                let b = (part.block_of)(i);
                mass[b] += p;
                size[b] += 1;
            }
            let mut lumped = Dense::zeros(part.blocks);
            for (i, &p) in pi.iter().enumerate() {
                let b = (part.block_of)(i);
                let w = if mass[b] > 0.0 { p / mass[b] } else { 1.0 / size[b] as f64 };
                op.for_each_in_row(i, |j, v| {
                    y[j] += p * v;
                    if w != 0.0 {
                        lumped[(b, (part.block_of)(j))] += w * v;
                    }
                });
            }
            Some((lumped, mass))
        }
    };
    let residual = y.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum();
    RowPass { residual, aggregated }
}

fn disaggregate(pi: &mut [f64], part: &Partition<'_>, (lumped, mass): &(Dense, Vec<f64>)) {
    // A lumped chain with several closed classes has no unique solution; skip the step.
    let Ok(xi) = gth_stationary(lumped) else { return };
    let mut size = vec![0usize; part.blocks];
    for i in 0..pi.len() {
        size[(part.block_of)(i)] += 1;
    }
    for (i, p) in pi.iter_mut().enumerate() {
        let b = (part.block_of)(i);
        *p = if mass[b] > 0.0 { xi[b] * *p / mass[b] } else { xi[b] / size[b] as f64 };
    }
}

fn gauss_seidel_sweep<O: TransitionOperator>(op: &O, pi: &mut [f64]) {
    point_updates(op, pi, 0..op.dim());
}

// Dense LU factors of `(I - P_BB)^T` for every diagonal block `B`.
struct BlockFactors {
    members: Vec<Vec<usize>>,
    // `None` when the block is (numerically) closed, so `I - P_BB` is singular.
    lu: Vec<Option<LU<f64, Dyn, Dyn>>>,
    block_of: Vec<u32>,
}

impl BlockFactors {
    fn build<O: TransitionOperator>(op: &O, part: &Partition<'_>, budget_mb: usize, exec: Execution) -> Option<Self> {
        let n = op.dim();
        let mut members = vec![Vec::new(); part.blocks];
        let block_of: Vec<u32> = (0..n).map(|i| (part.block_of)(i) as u32).collect();
        for (i, &b) in block_of.iter().enumerate() {
            members[b as usize].push(i);
        }
        let largest = members.iter().map(Vec::len).max().unwrap_or(0);
        let bytes: usize = members.iter().map(|m| m.len() * m.len() * 8).sum();
        if part.blocks < 2 || largest > MAX_DENSE_BLOCK || bytes > budget_mb << 20 {
            return None;
        }
        let mut local = vec![0usize; n];
        for m in &members {
            for (l, &i) in m.iter().enumerate() {
                local[i] = l;
            }
        }
        let lu = map_range(exec, part.blocks, |b| {
            let m = &members[b];
            let k = m.len();
            let mut a = DMatrix::<f64>::identity(k, k);
            for (l, &i) in m.iter().enumerate() {
                op.for_each_in_row(i, |j, v| {
                    if block_of[j] as usize == b {
                        // transposed: column l of P_BB becomes row l
                        a[(local[j], l)] -= v;
                    }
                });
            }
            let lu = a.lu();
            let u = lu.u();
            let closed = (0..k).any(|d| u[(d, d)].abs() < 1e-12);
            (!closed).then_some(lu)
        });
        Some(Self { members, lu, block_of })
    }

    fn sweep<O: TransitionOperator>(&self, op: &O, pi: &mut [f64]) {
        for (b, m) in self.members.iter().enumerate() {
            let Some(lu) = &self.lu[b] else {
                point_updates(op, pi, m.iter().copied());
                continue;
            };
            let mut rhs = DVector::<f64>::zeros(m.len());
            for (l, &j) in m.iter().enumerate() {
                let mut inflow = 0.0;
                op.for_each_in_col(j, |i, v| {
                    if self.block_of[i] as usize != b {
                        inflow += pi[i] * v;
                    }
                });
                rhs[l] = inflow;
            }
            if lu.solve_mut(&mut rhs) {
                for (l, &j) in m.iter().enumerate() {
                    // roundoff can leave tiny negatives where the inflow vanishes
                    pi[j] = rhs[l].max(0.0);
                }
            } else {
                point_updates(op, pi, m.iter().copied());
            }
        }
    }
}

fn point_updates<O: TransitionOperator>(op: &O, pi: &mut [f64], states: impl Iterator<Item = usize>) {
    for j in states {
        let mut inflow = 0.0;
        let mut stay = 0.0;
        op.for_each_in_col(j, |i, v| {
            if i == j {
                stay += v;
            } else {
                inflow += pi[i] * v;
            }
        });
        let leave = 1.0 - stay;
        if leave > 1e-300 {
            pi[j] = inflow / leave;
        }
    }
}

fn power_step<O: TransitionOperator>(op: &O, pi: &[f64], next: &mut [f64], exec: Execution) {
    fill_indexed(exec, next, |j| {
        let mut acc = 0.0;
        op.for_each_in_col(j, |i, v| acc += pi[i] * v);
        acc
    });
}

fn normalize(pi: &mut [f64]) -> Result<()> {
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Solver(format!("iterate lost its mass (sum = {total})")));
    }
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

fn solve_direct<O: TransitionOperator>(op: &O, options: &SolverOptions) -> Result<SteadyState> {
    let n = op.dim();
    if n > MAX_DIRECT_STATES {
        return Err(Error::Solver(format!("direct method limited to {MAX_DIRECT_STATES} states, got {n}")));
    }
    let mut dense = Dense::zeros(n);
    for i in 0..n {
        op.for_each_in_row(i, |j, v| dense[(i, j)] += v);
    }
    // GTH needs every state to reach the lower-indexed ones; transient states break
    // that, so fall back to LU on the balance equations with one replaced by sum = 1.
    let pi = match gth_stationary(&dense) {
        Ok(pi) => pi,
        Err(Error::NotIrreducible(_)) => lu_stationary(&dense)?,
        Err(e) => return Err(e),
    };
    let residual = residual(op, &pi);
    if residual > options.tolerance {
        return Err(Error::NotConverged { residual, sweeps: 0 });
    }
    Ok(SteadyState { pi, residual, sweeps_used: 0 })
}

fn lu_stationary(p: &Dense) -> Result<Vec<f64>> {
    let n = p.dim();
    let mut a = DMatrix::from_fn(n, n, |i, j| p[(j, i)] - f64::from(u8::from(i == j)));
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| Error::Solver("chain has no unique stationary distribution".into()))?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::operator::TransitionMatrix;

    fn opts(method: SolverMethod) -> SolverOptions {
        SolverOptions { method, tolerance: 1e-14, ..SolverOptions::default() }
    }

    #[test]
    fn swap_chain() {
        let p = TransitionMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ss = solve(&p, &opts(SolverMethod::GaussSeidel)).unwrap();
        assert_eq!(ss.pi, vec![0.5, 0.5]);
    }

    #[test]
    fn two_state_all_methods() {
        let p = TransitionMatrix::from_dense(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        for m in [SolverMethod::GaussSeidel, SolverMethod::Power, SolverMethod::Direct] {
            let ss = solve(&p, &opts(m)).unwrap();
            assert!((ss.pi[0] - 2.0 / 3.0).abs() < 1e-12, "{m:?}");
            assert!((ss.pi[1] - 1.0 / 3.0).abs() < 1e-12, "{m:?}");
            assert!(ss.residual <= 1e-10);
        }
    }

    #[test]
    fn direct_handles_transient_states() {
        // state 0 leaks into the closed pair {1, 2}
        let p = TransitionMatrix::from_dense(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 0.5]]).unwrap();
        let ss = solve(&p, &opts(SolverMethod::Direct)).unwrap();
        assert!(ss.pi[0].abs() < 1e-15);
        assert!((ss.pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let p = TransitionMatrix::from_dense(&[vec![0.999, 0.001], vec![0.5, 0.5]]).unwrap();
        let o = SolverOptions { tolerance: 1e-15, max_sweeps: 1, method: SolverMethod::Power, ..Default::default() };
        match solve(&p, &o) {
            Err(Error::NotConverged { residual, sweeps }) => {
                assert_eq!(sweeps, 1);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
