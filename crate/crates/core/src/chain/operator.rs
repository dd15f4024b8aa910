//! Transition operators: the factored matrix-free form and explicit sparse storage.

use crate::chain::config::SystemConfig;
use crate::chain::factors::{queue_transition_kernel, ConnectionDynamics, QueueKernel, WindowPmf};
use crate::chain::state::StateSpace;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::linalg::Dense;
use crate::mmpp::phase_step_matrix;

/// Row and column access to a row-stochastic matrix.
pub trait TransitionOperator: Sync {
    fn dim(&self) -> usize;

    /// Calls `f(j, P[i][j])` for the structurally nonzero entries of row `i`.
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, f: F);

    /// Calls `f(i, P[i][j])` for the structurally nonzero entries of column `j`.
    fn for_each_in_col<F: FnMut(usize, f64)>(&self, j: usize, f: F);

    fn row_sum(&self, i: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_in_row(i, |_, v| s += v);
        s
    }
}

/// Queue-level data kept for one `(c, s)` pair.
#[derive(Debug, Clone)]
pub(crate) struct QueueRows {
    pub next: Vec<WindowPmf>,
    pub expected_drops: Vec<f64>,
    pub expected_served: Vec<f64>,
    pub mean_batch: f64,
}

impl From<QueueKernel> for QueueRows {
    fn from(k: QueueKernel) -> Self {
        let xs = 0..=k.capacity();
        Self {
            expected_drops: xs.clone().map(|x| k.expected_drops(x)).collect(),
            expected_served: xs.clone().map(|x| k.expected_served(x)).collect(),
            next: xs.map(|x| k.next_len(x).clone()).collect(),
            mean_batch: k.mean_batch(),
        }
    }
}

/// The one-frame transition held as its three factors; entries are formed on demand.
#[derive(Debug, Clone)]
pub struct ModelOperator {
    space: StateSpace,
    phase: Dense,
    queue: Vec<QueueRows>,
    conn: Vec<WindowPmf>,
    x_down: usize,
    x_up: usize,
    c_down: usize,
    c_up: usize,
}

impl ModelOperator {
    pub fn build(config: &SystemConfig) -> Result<Self> {
        Self::build_with(config, Execution::default())
    }

    pub fn build_with(config: &SystemConfig, exec: Execution) -> Result<Self> {
        config.validate()?;
        let phases = config.mmpp.phase_count();
        let cap = config.queue_capacity;
        let bound = config.policy.connection_bound();
        let space = StateSpace::new(phases, cap, bound);
        let phase = phase_step_matrix(&config.mmpp, config.frame_minutes())?;

        let kernels = map_range(exec, space.block_count(), |b| {
            queue_transition_kernel(config, b / phases, b % phases).map(QueueRows::from)
        });
        let queue = kernels.into_iter().collect::<Result<Vec<_>>>()?;

        let dynamics = ConnectionDynamics::from_config(config);
        let conn = map_range(exec, (bound + 1) * (cap + 1), |k| dynamics.transition(&config.policy, k % (cap + 1), k / (cap + 1)));

        let mut x_down = 0;
        let mut x_up = 0;
        for rows in &queue {
            for (x, w) in rows.next.iter().enumerate() {
                x_down = x_down.max((x as i64 - w.start).max(0) as usize);
                x_up = x_up.max((w.end() - x as i64).max(0) as usize);
            }
        }
        let mut c_down = 0;
        let mut c_up = 0;
        for (k, w) in conn.iter().enumerate() {
            let c = (k / (cap + 1)) as i64;
            c_down = c_down.max((c - w.start).max(0) as usize);
            c_up = c_up.max((w.end() - c).max(0) as usize);
        }
        Ok(Self { space, phase, queue, conn, x_down, x_up, c_down, c_up })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn phase_matrix(&self) -> &Dense {
        &self.phase
    }

    #[inline]
    fn queue_rows(&self, c: usize, s: usize) -> &QueueRows {
        &self.queue[c * self.space.phases() + s]
    }

    #[inline]
    fn conn_row(&self, c: usize, x: usize) -> &WindowPmf {
        &self.conn[c * (self.space.queue_capacity() + 1) + x]
    }

    /// Next queue length distribution for the block `(c, s)` from `x`.
    pub fn queue_next(&self, c: usize, s: usize, x: usize) -> &WindowPmf {
        &self.queue_rows(c, s).next[x]
    }

    /// Next connection count distribution from `(x, c)`.
    pub fn connection_next(&self, c: usize, x: usize) -> &WindowPmf {
        self.conn_row(c, x)
    }

    pub fn expected_drops(&self, s: usize, x: usize, c: usize) -> f64 {
        self.queue_rows(c, s).expected_drops[x]
    }

    pub fn expected_served(&self, s: usize, x: usize, c: usize) -> f64 {
        self.queue_rows(c, s).expected_served[x]
    }

    /// Mean (capped) batch size for `c` connections in phase `s`.
    pub fn mean_batch(&self, s: usize, c: usize) -> f64 {
        self.queue_rows(c, s).mean_batch
    }

    /// Number of stored entries a materialized matrix would need.
    pub fn nonzero_estimate(&self) -> usize {
        let phases = self.space.phases();
        let cap = self.space.queue_capacity();
        let mut total = 0usize;
        for c in 0..=self.space.max_connections() {
            for s in 0..phases {
                let live = (0..phases).filter(|t| self.phase[(s, *t)] != 0.0).count();
                for x in 0..=cap {
                    total += live * self.queue_next(c, s, x).probs.len() * self.conn_row(c, x).probs.len();
                }
            }
        }
        total
    }
}

impl TransitionOperator for ModelOperator {
    fn dim(&self) -> usize {
        self.space.total_states()
    }

    #[inline]
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        let (s, x, c) = self.space.state(i);
        let q = self.queue_next(c, s, x);
        let k = self.conn_row(c, x);
        for s2 in 0..self.space.phases() {
            let ps = self.phase[(s, s2)];
            if ps == 0.0 {
                continue;
            }
            for (x2, pq) in q.iter() {
                if pq == 0.0 {
                    continue;
                }
                let psq = ps * pq;
                for (c2, pc) in k.iter() {
                    if pc != 0.0 {
                        f(self.space.index(s2, x2 as usize, c2 as usize), psq * pc);
                    }
                }
            }
        }
    }

    #[inline]
    fn for_each_in_col<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        let (s2, x2, c2) = self.space.state(j);
        let cap = self.space.queue_capacity();
        let c_lo = c2.saturating_sub(self.c_up);
        let c_hi = (c2 + self.c_down).min(self.space.max_connections());
        let x_lo = x2.saturating_sub(self.x_up);
        let x_hi = (x2 + self.x_down).min(cap);
        for c in c_lo..=c_hi {
            for x in x_lo..=x_hi {
                let pc = self.conn_row(c, x).get(c2 as i64);
                if pc == 0.0 {
                    continue;
                }
                for s in 0..self.space.phases() {
                    let ps = self.phase[(s, s2)];
                    if ps == 0.0 {
                        continue;
                    }
                    let pq = self.queue_next(c, s, x).get(x2 as i64);
                    if pq != 0.0 {
                        f(self.space.index(s, x, c), ps * pq * pc);
                    }
                }
            }
        }
    }
}

/// Explicit sparse transition matrix with both row-major and column-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    col_vals: Vec<f64>,
}

/// Bytes per stored nonzero across both orientations.
const BYTES_PER_NONZERO: usize = 2 * (8 + 4);

impl TransitionMatrix {
    /// Builds from rows of `(column, value)` pairs.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut row_vals = Vec::with_capacity(nnz);
        let mut col_counts = vec![0usize; n + 1];
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if j >= n {
                    return Err(Error::OutOfRange { what: "column", value: j, max: n.saturating_sub(1) });
                }
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParams(format!("matrix entry {v} is not a probability")));
                }
                col_idx.push(j as u32);
                row_vals.push(v);
                col_counts[j + 1] += 1;
            }
            row_ptr.push(col_idx.len());
        }
        for j in 0..n {
            col_counts[j + 1] += col_counts[j];
        }
        let col_ptr = col_counts.clone();
        let mut fill = col_counts;
        let mut row_idx = vec![0u32; nnz];
        let mut col_vals = vec![0.0; nnz];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k] as usize;
                row_idx[fill[j]] = i as u32;
                col_vals[fill[j]] = row_vals[k];
                fill[j] += 1;
            }
        }
        Ok(Self { n, row_ptr, col_idx, row_vals, col_ptr, row_idx, col_vals })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
                .collect(),
        )
    }

    /// Materializes an operator, refusing when the estimate exceeds `budget_mb`.
    pub fn materialize(op: &ModelOperator, budget_mb: usize, exec: Execution) -> Result<Self> {
        let needed = op.nonzero_estimate() * BYTES_PER_NONZERO;
        let budget = budget_mb.saturating_mul(1 << 20);
        if needed > budget {
            return Err(Error::MemoryBudget { states: op.dim(), needed_mb: needed.div_ceil(1 << 20), budget_mb });
        }
        let rows = map_range(exec, op.dim(), |i| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            op.for_each_in_row(i, |j, v| row.push((j, v)));
            // Duplicate targets cannot occur: (s', x', c') are distinct per factor entry.
            row
        });
        Self::from_rows(rows)
    }

    pub fn nnz(&self) -> usize {
        self.row_vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&(j as u32)) {
            Ok(k) => self.row_vals[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.n);
        for i in 0..self.n {
            self.for_each_in_row(i, |j, v| d[(i, j)] += v);
        }
        d
    }
}

impl TransitionOperator for TransitionMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn for_each_in_row<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            f(self.col_idx[k] as usize, self.row_vals[k]);
        }
    }

    #[inline]
    fn for_each_in_col<F: FnMut(usize, f64)>(&self, j: usize, mut f: F) {
        for k in self.col_ptr[j]..self.col_ptr[j + 1] {
            f(self.row_idx[k] as usize, self.col_vals[k]);
        }
    }
}

/// Builds the state space and explicit transition matrix for `config`.
///
/// Fails with [`Error::MemoryBudget`] when the matrix would not fit the configured
/// budget; [`ModelOperator`] serves those cases without materializing anything.
pub fn assemble(config: &SystemConfig) -> Result<(StateSpace, TransitionMatrix)> {
    let op = ModelOperator::build(config)?;
    let matrix = TransitionMatrix::materialize(&op, config.solver.memory_budget_mb, Execution::default())?;
    Ok((*op.space(), matrix))
}
