//! Frame-stepped Monte Carlo replay of the queue, used to validate the analytical model.
//!
//! Each frame: a packet batch is drawn from the start-of-frame phase and connection
//! count, every subchannel draws its own faded SNR and rate level, the queue serves
//! then accepts arrivals (tail drop on overflow), connection requests are admitted one
//! by one against the start-of-frame queue length, active connections end
//! independently, and the modulating chain is advanced by simulating its jumps over the
//! frame. Packets are served FIFO and their delay is counted in whole frames.
//!
//! Output analysis uses batch means after a warm-up period.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, Poisson};

use crate::chain::SystemConfig;
use crate::channel::db_to_linear;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};

/// Fewest frames accepted by [`run`].
pub const MIN_FRAMES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Fraction of frames discarded before statistics are collected.
    pub warmup_fraction: f64,
    pub batches: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { warmup_fraction: 0.1, batches: 30 }
    }
}

/// A point estimate and its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Whole-run packet and connection counters (warm-up included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub packets_arrived: u64,
    pub packets_served: u64,
    pub packets_dropped: u64,
    pub initial_backlog: u64,
    pub final_backlog: u64,
    pub connection_requests: u64,
    pub connections_rejected: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub p_block: Estimate,
    pub n_connections: Estimate,
    pub n_queue: Estimate,
    pub n_drop: Estimate,
    pub p_drop: Estimate,
    pub lambda_bar: Estimate,
    pub throughput: Estimate,
    /// Mean per-packet delay in frames, measured packet by packet.
    pub delay: Estimate,
    pub frames_run: u64,
    pub seed: u64,
    pub counters: Counters,
}

impl SimResult {
    /// Delay implied by Little's law from this run's time averages.
    pub fn little_delay(&self) -> f64 {
        if self.throughput.mean > 0.0 {
            self.n_queue.mean / self.throughput.mean
        } else {
            0.0
        }
    }
}

#[derive(Default, Clone, Copy)]
struct BatchSums {
    frames: f64,
    queue: f64,
    connections: f64,
    arrived: f64,
    served: f64,
    dropped: f64,
    requests: f64,
    rejected: f64,
    delay_sum: f64,
}

struct Samplers {
    batch: Vec<Option<Poisson<f64>>>,
    requests: Option<Poisson<f64>>,
    departures: Vec<Binomial>,
    fading: Option<Gamma<f64>>,
    /// Level used when the mean SNR is zero or infinite.
    fixed_packets: usize,
    thresholds: Vec<f64>,
    packets: Vec<usize>,
    holding: Vec<Option<Exp<f64>>>,
}

impl Samplers {
    fn new(config: &SystemConfig) -> Result<Self> {
        let phases = config.mmpp.phase_count();
        let bound = config.policy.connection_bound();
        let bad = |e: &dyn std::fmt::Display| Error::InvalidParams(format!("sampler: {e}"));
        let mut batch = Vec::with_capacity((bound + 1) * phases);
        for c in 0..=bound {
            for s in 0..phases {
                let mean = c as f64 * config.mmpp.arrival_rates()[s];
                batch.push(if mean > 0.0 { Some(Poisson::new(mean).map_err(|e| bad(&e))?) } else { None });
            }
        }
        let req_mean = config.conn_arrivals_per_frame();
        let requests = if req_mean > 0.0 { Some(Poisson::new(req_mean).map_err(|e| bad(&e))?) } else { None };
        let p_d = config.departure_probability();
        let departures =
            (0..=bound).map(|c| Binomial::new(c as u64, p_d).map_err(|e| bad(&e))).collect::<Result<Vec<_>>>()?;
        let snr_mean = db_to_linear(config.channel.avg_snr_db());
        let m = config.channel.nakagami_m();
        let fading = if snr_mean > 0.0 && snr_mean.is_finite() {
            Some(Gamma::new(m, snr_mean / m).map_err(|e| bad(&e))?)
        } else {
            None
        };
        let table = config.channel.rate_table();
        let thresholds = table.iter().map(|l| db_to_linear(l.min_snr_db)).collect();
        let packets: Vec<usize> = table.iter().map(|l| l.packets_per_frame).collect();
        let fixed_packets = if snr_mean > 0.0 { packets[packets.len() - 1] } else { packets[0] };
        let generator = config.mmpp.generator();
        let holding = (0..phases)
            .map(|s| {
                // per millisecond
                let rate = -generator[(s, s)] / 60_000.0;
                if rate > 0.0 { Exp::new(rate).map(Some).map_err(|e| bad(&e)) } else { Ok(None) }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { batch, requests, departures, fading, fixed_packets, thresholds, packets, holding })
    }
}

/// Runs one replication for `frames` frames with default output analysis.
pub fn run(config: &SystemConfig, frames: u64, seed: u64) -> Result<SimResult> {
    run_with(config, frames, seed, &SimOptions::default(), None)
}

/// Runs one replication, optionally writing a CSV trace of every frame.
pub fn run_with(
    config: &SystemConfig,
    frames: u64,
    seed: u64,
    options: &SimOptions,
    trace: Option<&mut dyn Write>,
) -> Result<SimResult> {
    run_stream(config, frames, seed, 0, options, trace)
}

/// Independent replications on distinct generator streams of the same seed.
pub fn replicate(config: &SystemConfig, frames: u64, seed: u64, count: usize, exec: Execution) -> Result<Vec<SimResult>> {
    map_range(exec, count, |k| run_stream(config, frames, seed, k as u64, &SimOptions::default(), None))
        .into_iter()
        .collect()
}

fn run_stream(
    config: &SystemConfig,
    frames: u64,
    seed: u64,
    stream: u64,
    options: &SimOptions,
    mut trace: Option<&mut dyn Write>,
) -> Result<SimResult> {
    config.validate()?;
    if frames < MIN_FRAMES {
        return Err(Error::InvalidParams(format!("simulation needs at least {MIN_FRAMES} frames")));
    }
    if options.batches < 20 {
        return Err(Error::InvalidParams("batch means needs at least 20 batches".into()));
    }
    if !(0.0..1.0).contains(&options.warmup_fraction) {
        return Err(Error::InvalidParams("warm-up fraction must lie in [0, 1)".into()));
    }
    let warmup = (frames as f64 * options.warmup_fraction).floor() as u64;
    let measured = frames - warmup;
    let batch_len = measured / options.batches as u64;
    if batch_len == 0 {
        return Err(Error::InvalidParams("too few frames for the requested batches".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let samplers = Samplers::new(config)?;
    let phases = config.mmpp.phase_count();
    let cap = config.queue_capacity;
    let frame_ms = config.frame_duration_ms;
    let generator = config.mmpp.generator();

    if let Some(w) = trace.as_deref_mut() {
        writeln!(w, "frame,s,x,c,arrivals,served,dropped")?;
    }

    let (mut s, mut x, mut c) = (0usize, 0usize, 0usize);
    let mut fifo: VecDeque<(u64, usize)> = VecDeque::new();
    let mut counters = Counters::default();
    let mut batches = vec![BatchSums::default(); options.batches];

    for t in 0..frames {
        let (s0, x0, c0) = (s, x, c);

        // packets
        let offered = match &samplers.batch[c0 * phases + s0] {
            Some(p) => p.sample(&mut rng) as usize,
            None => 0,
        };
        let arrivals = offered.min(config.max_batch);
        let capacity: usize = (0..config.channel.subchannel_count()).map(|_| sample_level(&samplers, &mut rng)).sum();
        let served = capacity.min(x0);
        let mut delay_sum = 0u64;
        let mut left = served;
        while left > 0 {
            let front = fifo.front_mut().expect("backlog and FIFO agree");
            let take = front.1.min(left);
            delay_sum += take as u64 * (t - front.0);
            front.1 -= take;
            left -= take;
            if front.1 == 0 {
                fifo.pop_front();
            }
        }
        let after_service = x0 - served;
        let admitted_packets = arrivals.min(cap - after_service);
        let dropped = arrivals - admitted_packets;
        if admitted_packets > 0 {
            fifo.push_back((t, admitted_packets));
        }
        x = after_service + admitted_packets;

        // connections
        let requests = samplers.requests.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        let mut accepted = 0usize;
        for _ in 0..requests {
            let alpha = config.policy.acceptance(x0, c0 + accepted);
            if alpha >= 1.0 || (alpha > 0.0 && rng.random::<f64>() < alpha) {
                accepted += 1;
            }
        }
        let departed = samplers.departures[c0].sample(&mut rng) as usize;
        c = c0 + accepted - departed;

        // phase
        let mut clock = 0.0;
        while let Some(hold) = &samplers.holding[s] {
            clock += hold.sample(&mut rng);
            if clock > frame_ms {
                break;
            }
            s = next_phase(generator, s, &mut rng);
        }

        if let Some(w) = trace.as_deref_mut() {
            writeln!(w, "{t},{s0},{x0},{c0},{arrivals},{served},{dropped}")?;
        }

        if t == 0 {
            counters.initial_backlog = x0 as u64;
        }
        counters.packets_arrived += arrivals as u64;
        counters.packets_served += served as u64;
        counters.packets_dropped += dropped as u64;
        counters.connection_requests += requests as u64;
        counters.connections_rejected += (requests - accepted) as u64;

        if t >= warmup {
            let b = (((t - warmup) / batch_len) as usize).min(options.batches - 1);
            let sums = &mut batches[b];
            sums.frames += 1.0;
            sums.queue += x0 as f64;
            sums.connections += c0 as f64;
            sums.arrived += arrivals as f64;
            sums.served += served as f64;
            sums.dropped += dropped as f64;
            sums.requests += requests as f64;
            sums.rejected += (requests - accepted) as f64;
            sums.delay_sum += delay_sum as f64;
        }
    }
    counters.final_backlog = x as u64;

    let per_frame = |f: fn(&BatchSums) -> f64| ratio_estimate(&batches, f, |b| b.frames);
    Ok(SimResult {
        p_block: ratio_estimate(&batches, |b| b.rejected, |b| b.requests),
        n_connections: per_frame(|b| b.connections),
        n_queue: per_frame(|b| b.queue),
        n_drop: per_frame(|b| b.dropped),
        p_drop: ratio_estimate(&batches, |b| b.dropped, |b| b.arrived),
        lambda_bar: per_frame(|b| b.arrived),
        throughput: per_frame(|b| b.served),
        delay: ratio_estimate(&batches, |b| b.delay_sum, |b| b.served),
        frames_run: frames,
        seed,
        counters,
    })
}

fn sample_level(samplers: &Samplers, rng: &mut ChaCha8Rng) -> usize {
    let Some(g) = &samplers.fading else { return samplers.fixed_packets };
    let snr = g.sample(rng);
    let idx = samplers.thresholds.iter().rposition(|th| *th <= snr).unwrap_or(0);
    samplers.packets[idx]
}

fn next_phase(generator: &crate::linalg::Dense, s: usize, rng: &mut ChaCha8Rng) -> usize {
    let out = -generator[(s, s)];
    let mut u = rng.random::<f64>() * out;
    let n = generator.dim();
    for t in (0..n).filter(|t| *t != s) {
        u -= generator[(s, t)];
        if u < 0.0 {
            return t;
        }
    }
    (0..n).rev().find(|t| *t != s && generator[(s, *t)] > 0.0).unwrap_or(s)
}

/// Ratio `sum num / sum den` with a delta-method batch-means standard error.
fn ratio_estimate(batches: &[BatchSums], num: impl Fn(&BatchSums) -> f64, den: impl Fn(&BatchSums) -> f64) -> Estimate {
    let total_den: f64 = batches.iter().map(&den).sum();
    if total_den <= 0.0 {
        return Estimate::default();
    }
    let ratio = batches.iter().map(&num).sum::<f64>() / total_den;
    let b = batches.len() as f64;
    let mean_den = total_den / b;
    let ss: f64 = batches.iter().map(|bs| (num(bs) - ratio * den(bs)).powi(2)).sum();
    let std_err = (ss / (b * (b - 1.0))).sqrt() / mean_den;
    Estimate { mean: ratio, std_err }
}
