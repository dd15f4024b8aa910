//! Connection-level and packet-level performance figures from a stationary distribution.

use crate::chain::{solve_model, Axis, ModelOperator, StateSpace, SteadyState, SystemConfig};
use crate::error::Result;
use crate::mmpp::{mean_arrival_rate, stationary_phase_distribution, MmppParams};
use crate::policy::CacPolicy;

/// Exact stationary rates kept alongside the headline figures.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// `sum pi(s,x,c) E[batch | s, c]`, packets/frame.
    pub exact_arrival_rate: f64,
    /// `sum pi(s,x,c) E[min(R, x)]`, packets/frame.
    pub exact_service_rate: f64,
    pub residual: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerformanceReport {
    pub p_block: f64,
    pub n_connections: f64,
    pub n_queue: f64,
    /// Dropped packets per frame.
    pub n_drop: f64,
    pub p_drop: f64,
    /// Offered packets per frame, `lambda_MMPP * N_c`.
    pub lambda_bar: f64,
    /// Packets transmitted per frame.
    pub throughput: f64,
    /// Mean packet delay in frames.
    pub delay: f64,
    pub diagnostics: Diagnostics,
}

/// Probability that an arriving connection request is rejected.
pub fn blocking_probability(pi: &[f64], space: &StateSpace, policy: &CacPolicy) -> f64 {
    match policy {
        CacPolicy::Threshold { c_max: bound } | CacPolicy::Unrestricted { c_trunc: bound } => pi
            .iter()
            .enumerate()
            .filter(|(i, _)| space.state(*i).2 == *bound)
            .map(|(_, p)| p)
            .sum(),
        CacPolicy::QueueAware { .. } => pi
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (_, x, c) = space.state(i);
                (1.0 - policy.acceptance(x, c)) * p
            })
            .sum(),
    }
}

pub fn average_connections(pi: &[f64], space: &StateSpace) -> f64 {
    pi.iter().enumerate().map(|(i, p)| space.state(i).2 as f64 * p).sum()
}

pub fn average_queue_length(pi: &[f64], space: &StateSpace) -> f64 {
    pi.iter().enumerate().map(|(i, p)| space.state(i).1 as f64 * p).sum()
}

/// Packet loss figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropping {
    pub n_drop: f64,
    pub p_drop: f64,
    pub lambda_bar: f64,
    pub exact_arrival_rate: f64,
    pub exact_service_rate: f64,
}

/// Expected drops per frame from the uncapped net queue increase, and the drop
/// probability against the offered rate `lambda_MMPP * N_c`.
pub fn dropping(pi: &[f64], op: &ModelOperator, mmpp: &MmppParams) -> Result<Dropping> {
    let space = op.space();
    let mut n_drop = 0.0;
    let mut arrivals = 0.0;
    let mut served = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (s, x, c) = space.state(i);
        n_drop += p * op.expected_drops(s, x, c);
        arrivals += p * op.mean_batch(s, c);
        served += p * op.expected_served(s, x, c);
    }
    let lambda_mmpp = mean_arrival_rate(&stationary_phase_distribution(mmpp)?, mmpp.arrival_rates())?;
    let lambda_bar = lambda_mmpp * average_connections(pi, space);
    let p_drop = if lambda_bar > 0.0 { n_drop / lambda_bar } else { 0.0 };
    Ok(Dropping { n_drop, p_drop, lambda_bar, exact_arrival_rate: arrivals, exact_service_rate: served })
}

/// Throughput `lambda_bar (1 - p_drop)` and Little's-law delay `N_x / throughput`
/// (zero when nothing is transmitted).
pub fn throughput_and_delay(n_queue: f64, p_drop: f64, lambda_bar: f64) -> (f64, f64) {
    let throughput = lambda_bar * (1.0 - p_drop);
    let delay = if throughput > 0.0 { n_queue / throughput } else { 0.0 };
    (throughput, delay)
}

/// Computes every figure from an already solved model.
pub fn report_from(config: &SystemConfig, op: &ModelOperator, steady: &SteadyState) -> Result<PerformanceReport> {
    let pi = &steady.pi;
    let space = op.space();
    let n_queue = average_queue_length(pi, space);
    let drop = dropping(pi, op, &config.mmpp)?;
    let (throughput, delay) = throughput_and_delay(n_queue, drop.p_drop, drop.lambda_bar);
    Ok(PerformanceReport {
        p_block: blocking_probability(pi, space, &config.policy),
        n_connections: average_connections(pi, space),
        n_queue,
        n_drop: drop.n_drop,
        p_drop: drop.p_drop,
        lambda_bar: drop.lambda_bar,
        throughput,
        delay,
        diagnostics: Diagnostics {
            exact_arrival_rate: drop.exact_arrival_rate,
            exact_service_rate: drop.exact_service_rate,
            residual: steady.residual,
            sweeps: steady.sweeps_used,
        },
    })
}

/// Builds, solves and evaluates the model for `config`.
pub fn evaluate(config: &SystemConfig) -> Result<PerformanceReport> {
    let (op, steady) = solve_model(config)?;
    report_from(config, &op, &steady)
}

/// Marginal of the connection count, a convenience over [`StateSpace::marginal`].
pub fn connection_marginal(pi: &[f64], space: &StateSpace) -> Result<Vec<f64>> {
    space.marginal(pi, Axis::Connections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::AcceptanceProfile;

    #[test]
    fn threshold_zero_blocks_everything() {
        let space = StateSpace::new(1, 2, 0);
        let pi = vec![0.2, 0.3, 0.5];
        assert!((blocking_probability(&pi, &space, &CacPolicy::Threshold { c_max: 0 }) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn queue_aware_all_rejecting() {
        let space = StateSpace::new(1, 1, 2);
        let pi = vec![1.0 / 6.0; 6];
        let policy = CacPolicy::QueueAware { alpha: AcceptanceProfile::Table(vec![0.0, 0.0]), c_trunc: 2 };
        assert!((blocking_probability(&pi, &space, &policy) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn throughput_conventions() {
        assert_eq!(throughput_and_delay(3.0, 0.0, 2.0), (2.0, 1.5));
        assert_eq!(throughput_and_delay(0.0, 0.0, 0.0), (0.0, 0.0));
    }
}
