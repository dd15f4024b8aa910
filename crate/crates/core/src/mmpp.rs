//! Markov-modulated Poisson packet arrivals.
//!
//! The modulating chain is given by its generator in events per minute, while the
//! per-phase packet rates are already expressed per frame and per connection. The
//! per-frame phase transition matrix is obtained by uniformization.

use crate::error::{Error, Result};
use crate::linalg::{gth_stationary, is_irreducible, Dense};
use crate::pmf::Pmf;

/// Truncation target for the uniformization series.
const UNIFORMIZATION_TAIL: f64 = 1e-14;

/// Above this value of `q * t` the exponential is computed by scaling and squaring.
const MAX_UNIFORMIZED_MEAN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MmppParams {
    generator: Dense,
    arrival_rates: Vec<f64>,
}

impl MmppParams {
    /// `generator` holds transition rates per minute; its diagonal is recomputed as
    /// the negative off-diagonal row sum. `arrival_rates` are packets per frame per connection.
    pub fn new(generator: &[Vec<f64>], arrival_rates: Vec<f64>) -> Result<Self> {
        let mut generator = Dense::from_rows(generator)?;
        let n = generator.dim();
        if n == 0 {
            return Err(Error::InvalidParams("MMPP needs at least one phase".into()));
        }
        if arrival_rates.len() != n {
            return Err(Error::LengthMismatch { left: arrival_rates.len(), right: n });
        }
        for i in 0..n {
            let mut off = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                let q = generator[(i, j)];
                if !(q >= 0.0 && q.is_finite()) {
                    return Err(Error::InvalidParams(format!("generator entry ({i},{j}) = {q} must be >= 0")));
                }
                off += q;
            }
            let diag = generator[(i, i)];
            if diag != 0.0 && (diag + off).abs() > 1e-9 * off.max(1.0) {
                return Err(Error::InvalidParams(format!("generator row {i} does not sum to zero")));
            }
            generator[(i, i)] = -off;
        }
        if let Some(r) = arrival_rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidParams(format!("arrival rate {r} must be >= 0")));
        }
        if !is_irreducible(&generator) && n > 1 {
            return Err(Error::NotIrreducible("modulating chain has more than one communicating class".into()));
        }
        Ok(Self { generator, arrival_rates })
    }

    /// Single-phase process: plain Poisson arrivals.
    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(&[vec![0.0]], vec![rate])
    }

    pub fn phase_count(&self) -> usize {
        self.arrival_rates.len()
    }

    pub fn generator(&self) -> &Dense {
        &self.generator
    }

    pub fn arrival_rates(&self) -> &[f64] {
        &self.arrival_rates
    }
}

/// Solves `pi * Q = 0`, `sum(pi) = 1` for the modulating chain.
pub fn stationary_phase_distribution(params: &MmppParams) -> Result<Vec<f64>> {
    if params.phase_count() == 1 {
        return Ok(vec![1.0]);
    }
    if !is_irreducible(params.generator()) {
        return Err(Error::NotIrreducible("modulating chain has more than one communicating class".into()));
    }
    gth_stationary(params.generator())
}

/// Long-run packet rate per connection, `pi . lambda`.
pub fn mean_arrival_rate(pi: &[f64], rates: &[f64]) -> Result<f64> {
    if pi.len() != rates.len() {
        return Err(Error::LengthMismatch { left: pi.len(), right: rates.len() });
    }
    Ok(pi.iter().zip(rates).map(|(p, r)| p * r).sum())
}

/// Per-frame phase transition matrix `exp(Q * frame_duration)`, `frame_duration` in minutes.
pub fn phase_step_matrix(params: &MmppParams, frame_duration: f64) -> Result<Dense> {
    if !(frame_duration > 0.0 && frame_duration.is_finite()) {
        return Err(Error::InvalidParams(format!("frame duration {frame_duration} must be > 0")));
    }
    Ok(expm_generator(params.generator(), frame_duration))
}

fn expm_generator(generator: &Dense, t: f64) -> Dense {
    let n = generator.dim();
    let q = (0..n).map(|i| -generator[(i, i)]).fold(0.0, f64::max);
    if q == 0.0 {
        return Dense::identity(n);
    }
    let mut squarings = 0;
    let mut step = t;
    while q * step > MAX_UNIFORMIZED_MEAN {
        step /= 2.0;
        squarings += 1;
    }
    let mut m = uniformized_exp(generator, q, step);
    for _ in 0..squarings {
        m = m.matmul(&m);
        renormalize_rows(&mut m);
    }
    m
}

fn uniformized_exp(generator: &Dense, q: f64, t: f64) -> Dense {
    let n = generator.dim();
    let mut unif = generator.clone();
    unif.scale(1.0 / q);
    unif.add_assign(&Dense::identity(n));

    let mean = q * t;
    let mut weight = (-mean).exp();
    let mut cumulative = weight;
    let mut power = Dense::identity(n);
    let mut out = Dense::identity(n);
    out.scale(weight);
    let mut k = 0usize;
    while 1.0 - cumulative > UNIFORMIZATION_TAIL && k < 10_000 {
        k += 1;
        power = power.matmul(&unif);
        weight *= mean / k as f64;
        cumulative += weight;
        let mut term = power.clone();
        term.scale(weight);
        out.add_assign(&term);
    }
    renormalize_rows(&mut out);
    out
}

// Truncation leaves each row short by at most the series tail; put it back.
fn renormalize_rows(m: &mut Dense) {
    for i in 0..m.dim() {
        let s: f64 = m.row(i).iter().sum();
        for j in 0..m.dim() {
            m[(i, j)] /= s;
        }
    }
}

/// Poisson probabilities with the given mean, exact below `truncation` and with the
/// whole upper tail folded into bin `truncation`.
pub fn poisson_pmf(mean: f64, truncation: usize) -> Pmf {
    if mean <= 0.0 {
        return Pmf::point_mass(0).fold_at(truncation);
    }
    let mut probs = Vec::with_capacity(truncation + 1);
    let ln_mean = mean.ln();
    let mut ln_p = -mean;
    let mut head = 0.0;
    for n in 0..truncation {
        if n > 0 {
            ln_p += ln_mean - (n as f64).ln();
        }
        let p = ln_p.exp();
        probs.push(p);
        head += p;
    }
    probs.push((1.0 - head).max(0.0));
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Pmf::from_raw(probs)
}

/// Probability of `n` events of a Poisson process with `rate` (per minute) in `interval` minutes.
pub fn poisson_event_pmf(rate: f64, interval: f64, truncation: usize) -> Pmf {
    poisson_pmf(rate * interval, truncation)
}

/// Smallest `n` with `P(N > n) < tail` for `N ~ Poisson(mean)`.
pub fn poisson_support_for_tail(mean: f64, tail: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let mut p = (-mean).exp();
    let mut cumulative = p;
    let mut n = 0usize;
    // For very large means exp(-mean) underflows; fall back to a generous normal bound.
    if p == 0.0 {
        return (mean + 12.0 * mean.sqrt() + 20.0).ceil() as usize;
    }
    while 1.0 - cumulative >= tail {
        n += 1;
        p *= mean / n as f64;
        cumulative += p;
        if p == 0.0 || n > 1_000_000 {
            break;
        }
    }
    n
}

/// Aggregate packets offered in one frame by `connections` connections in `phase`
/// (zero-based), Poisson with mean `connections * lambda_phase`, capped at `max_batch`.
pub fn batch_arrival_pmf(params: &MmppParams, connections: usize, phase: usize, max_batch: usize) -> Result<Pmf> {
    if phase >= params.phase_count() {
        return Err(Error::OutOfRange { what: "phase", value: phase, max: params.phase_count() - 1 });
    }
    Ok(poisson_pmf(connections as f64 * params.arrival_rates[phase], max_batch))
}
