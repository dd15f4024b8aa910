//! The connection-level and queue-level factors of the one-frame transition.
//!
//! Within a frame, with start-of-frame state `(s, x, c)`:
//! 1. up to `R` queued packets are served, `R ~ service_pmf`;
//! 2. a batch `a ~ Poisson(c * lambda_s)` (capped at `A`) is appended and overflow beyond
//!    `X` is dropped;
//! 3. connection requests arrive as Poisson, each admitted with the policy's acceptance
//!    probability at `(x, c + admitted so far)`; independently each of the `c` active
//!    connections ends with probability `p_d`.
//!
//! Given the start-of-frame state the three pieces are independent, so the one-step
//! probability is the product of phase, queue and connection factors.

use crate::chain::config::SystemConfig;
use crate::channel::service_pmf;
use crate::error::{Error, Result};
use crate::mmpp::{batch_arrival_pmf, poisson_pmf, poisson_support_for_tail};
use crate::pmf::Pmf;
use crate::policy::CacPolicy;

/// Connection-request tail folded into the last bin.
pub const CONNECTION_ARRIVAL_TAIL: f64 = 1e-12;

/// Binomial departure tail folded into the last bin.
pub const DEPARTURE_TAIL: f64 = 1e-15;

/// A distribution over a contiguous integer window `start..start + probs.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPmf {
    pub start: i64,
    pub probs: Vec<f64>,
}

impl WindowPmf {
    pub fn get(&self, n: i64) -> f64 {
        usize::try_from(n - self.start).ok().and_then(|k| self.probs.get(k).copied()).unwrap_or(0.0)
    }

    pub fn end(&self) -> i64 {
        self.start + self.probs.len() as i64 - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(move |(k, p)| (self.start + k as i64, *p))
    }

    fn trimmed(mut probs: Vec<f64>, mut start: i64) -> Self {
        let first = probs.iter().position(|p| *p != 0.0).unwrap_or(0);
        let last = probs.iter().rposition(|p| *p != 0.0).unwrap_or(0);
        probs.truncate(last + 1);
        probs.drain(..first);
        start += first as i64;
        Self { start, probs }
    }
}

/// Per-frame connection request and departure laws.
#[derive(Debug, Clone)]
pub struct ConnectionDynamics {
    requests: Pmf,
    departure_prob: f64,
}

impl ConnectionDynamics {
    pub fn new(requests_per_frame: f64, departure_prob: f64) -> Self {
        let n = poisson_support_for_tail(requests_per_frame, CONNECTION_ARRIVAL_TAIL);
        Self { requests: poisson_pmf(requests_per_frame, n), departure_prob }
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        Self::new(config.conn_arrivals_per_frame(), config.departure_probability())
    }

    pub fn requests(&self) -> &Pmf {
        &self.requests
    }

    pub fn departure_prob(&self) -> f64 {
        self.departure_prob
    }

    /// Distribution of the number of admitted requests in a frame starting at `(x, c)`.
    pub fn admitted(&self, policy: &CacPolicy, x: usize, c: usize) -> Vec<f64> {
        let requests = self.requests.probs();
        let mut out = vec![0.0; requests.len()];
        let mut current = vec![1.0];
        out[0] += requests[0];
        for (n, p_n) in requests.iter().enumerate().skip(1) {
            let mut next = vec![0.0; current.len() + 1];
            for (k, mass) in current.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                let alpha = policy.acceptance(x, c + k);
                next[k] += mass * (1.0 - alpha);
                next[k + 1] += mass * alpha;
            }
            for (k, mass) in next.iter().enumerate() {
                out[k] += p_n * mass;
            }
            current = next;
            debug_assert_eq!(current.len(), n + 1);
        }
        out
    }

    /// Binomial(c, p_d) departures, with the negligible upper tail folded.
    pub fn departures(&self, c: usize) -> Vec<f64> {
        let p = self.departure_prob;
        if c == 0 || p <= 0.0 {
            return vec![1.0];
        }
        if p >= 1.0 {
            let mut v = vec![0.0; c + 1];
            v[c] = 1.0;
            return v;
        }
        let ln_p = p.ln();
        let ln_q = (-p).ln_1p();
        let mut ln_choose = 0.0;
        let full: Vec<f64> = (0..=c)
            .map(|k| {
                if k > 0 {
                    ln_choose += ((c - k + 1) as f64).ln() - (k as f64).ln();
                }
                (ln_choose + k as f64 * ln_p + (c - k) as f64 * ln_q).exp()
            })
            .collect();
        let mut tail = 0.0;
        let mut keep = c;
        while keep > 0 && tail + full[keep] < DEPARTURE_TAIL {
            tail += full[keep];
            keep -= 1;
        }
        let mut out = full[..=keep].to_vec();
        out[keep] += tail;
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= total);
        out
    }

    /// Next-frame connection count distribution as a window over `c'`.
    pub fn transition(&self, policy: &CacPolicy, x: usize, c: usize) -> WindowPmf {
        let bound = policy.connection_bound() as i64;
        let admitted = self.admitted(policy, x, c);
        let departed = self.departures(c);
        let lo = c as i64 - (departed.len() as i64 - 1);
        let hi = c as i64 + admitted.len() as i64 - 1;
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (k, pa) in admitted.iter().enumerate() {
            if *pa == 0.0 {
                continue;
            }
            for (d, pd) in departed.iter().enumerate() {
                let next = (c as i64 + k as i64 - d as i64).clamp(0, bound);
                probs[(next - lo) as usize] += pa * pd;
            }
        }
        WindowPmf::trimmed(probs, lo)
    }
}

/// Distribution of the connection count after one frame, as a PMF over `0..=bound`.
///
/// Rates are per minute and `frame_minutes` is the frame length in minutes.
pub fn connection_transition_pmf(
    policy: &CacPolicy,
    connections: usize,
    queue_len: usize,
    arrival_rate: f64,
    mean_duration: f64,
    frame_minutes: f64,
) -> Result<Pmf> {
    let bound = policy.connection_bound();
    if connections > bound {
        return Err(Error::OutOfRange { what: "connections", value: connections, max: bound });
    }
    let dynamics = ConnectionDynamics::new(arrival_rate * frame_minutes, -(-frame_minutes / mean_duration).exp_m1());
    let w = dynamics.transition(policy, queue_len, connections);
    let mut probs = vec![0.0; bound + 1];
    for (c, p) in w.iter() {
        probs[c as usize] += p;
    }
    Ok(Pmf::from_raw(probs))
}

/// Queue dynamics for one `(c, s)` pair: next queue length and uncapped net change per `x`.
#[derive(Debug, Clone)]
pub struct QueueKernel {
    capacity: usize,
    next: Vec<WindowPmf>,
    net: Vec<WindowPmf>,
    mean_batch: f64,
}

impl QueueKernel {
    /// Serve-then-arrive kernel for a given batch law, service law and capacity.
    pub fn new(batch: &Pmf, service: &Pmf, capacity: usize) -> Self {
        let r_max = service.support_max();
        let a_max = batch.support_max();
        let mut next = Vec::with_capacity(capacity + 1);
        let mut net = Vec::with_capacity(capacity + 1);
        for x in 0..=capacity {
            // served = min(R, x)
            let served = service.fold_at(x.min(r_max));
            let served = served.probs();
            let lowest = -(served.len() as i64 - 1);
            let mut net_probs = vec![0.0; served.len() + a_max];
            for (k, pk) in served.iter().enumerate() {
                if *pk == 0.0 {
                    continue;
                }
                for (a, pa) in batch.probs().iter().enumerate() {
                    net_probs[(a as i64 - k as i64 - lowest) as usize] += pk * pa;
                }
            }
            let net_w = WindowPmf { start: lowest, probs: net_probs };
            let lo = x as i64 + net_w.start;
            let hi = (x as i64 + net_w.end()).min(capacity as i64);
            let mut next_probs = vec![0.0; (hi - lo + 1) as usize];
            for (m, p) in net_w.iter() {
                let target = (x as i64 + m).min(capacity as i64);
                next_probs[(target - lo) as usize] += p;
            }
            next.push(WindowPmf::trimmed(next_probs, lo));
            net.push(WindowPmf::trimmed(net_w.probs, net_w.start));
        }
        Self { capacity, next, net, mean_batch: batch.mean() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Distribution of the end-of-frame queue length from `x`.
    pub fn next_len(&self, x: usize) -> &WindowPmf {
        &self.next[x]
    }

    /// Distribution of `m = a - min(R, x)` before overflow is dropped.
    pub fn net_increase(&self, x: usize) -> &WindowPmf {
        &self.net[x]
    }

    /// Expected packets dropped in one frame from `x`.
    pub fn expected_drops(&self, x: usize) -> f64 {
        let room = (self.capacity - x) as i64;
        self.net[x].iter().filter(|(m, _)| *m > room).map(|(m, p)| (m - room) as f64 * p).sum()
    }

    /// Expected packets served in one frame from `x`, `E[min(R, x)]`.
    pub fn expected_served(&self, x: usize) -> f64 {
        self.mean_batch - self.net[x].iter().map(|(m, p)| m as f64 * p).sum::<f64>()
    }

    pub fn mean_batch(&self) -> f64 {
        self.mean_batch
    }
}

/// Queue kernel for `connections` connections in `phase` (zero-based) under `config`.
pub fn queue_transition_kernel(config: &SystemConfig, connections: usize, phase: usize) -> Result<QueueKernel> {
    let batch = batch_arrival_pmf(&config.mmpp, connections, phase, config.max_batch)?;
    Ok(QueueKernel::new(&batch, &service_pmf(&config.channel), config.queue_capacity))
}
