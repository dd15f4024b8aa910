//! A single-phase (Poisson-batch) version of the model written directly from the
//! definitions, sharing no code with the library beyond the parameter structs.
//!
//! The state is `(x, c)`; each frame the queue is served then receives the batch
//! offered by the connections present at the start of the frame, while connection
//! requests arrive, are admitted one at a time against the running count, and each
//! active connection ends with probability `1 - exp(-T/d)`.

use cac_model::chain::SystemConfig;
use cac_model::policy::AcceptanceProfile;
use cac_model::CacPolicy;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct Figures {
    pub p_block: f64,
    pub n_connections: f64,
    pub n_queue: f64,
    pub n_drop: f64,
    pub p_drop: f64,
    pub lambda_bar: f64,
    pub throughput: f64,
    pub delay: f64,
}

fn poisson(mean: f64, len: usize) -> Vec<f64> {
    let mut p = vec![0.0; len];
    if len == 0 {
        return p;
    }
    p[0] = (-mean).exp();
    for k in 1..len {
        p[k] = p[k - 1] * mean / k as f64;
    }
    p
}

/// Poisson(mean) on `0..=cap` with the upper tail lumped at `cap`.
fn poisson_capped(mean: f64, cap: usize) -> Vec<f64> {
    let mut p = poisson(mean, cap + 1);
    let head: f64 = p[..cap].iter().sum();
    p[cap] = (1.0 - head).max(0.0);
    p
}

fn accepts(policy: &CacPolicy, x: usize, c: usize) -> f64 {
    match policy {
        CacPolicy::Threshold { c_max } => (c < *c_max) as u8 as f64,
        CacPolicy::Unrestricted { c_trunc } => (c < *c_trunc) as u8 as f64,
        CacPolicy::QueueAware { alpha, c_trunc } => {
            if c >= *c_trunc {
                return 0.0;
            }
            match alpha {
                AcceptanceProfile::Step { b_th } => (x < *b_th) as u8 as f64,
                AcceptanceProfile::Table(a) => a[x],
            }
        }
    }
}

fn bound(policy: &CacPolicy) -> usize {
    match policy {
        CacPolicy::Threshold { c_max } => *c_max,
        CacPolicy::Unrestricted { c_trunc } | CacPolicy::QueueAware { c_trunc, .. } => *c_trunc,
    }
}

/// Packets per frame over all subchannels under Rayleigh fading.
fn service(config: &SystemConfig) -> Vec<f64> {
    let ch = &config.channel;
    assert_eq!(ch.nakagami_m(), 1.0, "reference model covers Rayleigh fading only");
    let mean = 10f64.powf(ch.avg_snr_db() / 10.0);
    let table = ch.rate_table();
    let top = table.last().unwrap().packets_per_frame;
    let mut one = vec![0.0; top + 1];
    for (i, level) in table.iter().enumerate() {
        let above = |db: f64| if db == f64::NEG_INFINITY { 1.0 } else { (-10f64.powf(db / 10.0) / mean).exp() };
        let next = table.get(i + 1).map_or(0.0, |l| above(l.min_snr_db));
        one[level.packets_per_frame] += above(level.min_snr_db) - next;
    }
    let mut total = vec![1.0];
    for _ in 0..ch.subchannel_count() {
        let mut out = vec![0.0; total.len() + top];
        for (i, a) in total.iter().enumerate() {
            for (j, b) in one.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        total = out;
    }
    total
}

pub fn solve(config: &SystemConfig) -> Figures {
    assert_eq!(config.mmpp.phase_count(), 1);
    let lambda = config.mmpp.arrival_rates()[0];
    let xmax = config.queue_capacity;
    let cmax = bound(&config.policy);
    let t_min = config.frame_duration_ms / 60_000.0;
    let p_dep = 1.0 - (-t_min / config.conn_mean_duration).exp();
    let req_mean = config.conn_arrival_rate * t_min;
    // enough request terms that the neglected mass is far below the comparison tolerance
    let requests = poisson(req_mean, 60);
    let served_law = service(config);

    let n = (xmax + 1) * (cmax + 1);
    let idx = |x: usize, c: usize| c * (xmax + 1) + x;
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut drops = vec![0.0; n];
    for c in 0..=cmax {
        let batch = poisson_capped(lambda * c as f64, config.max_batch);
        let mut deps = vec![0.0; c + 1];
        for (k, d) in deps.iter_mut().enumerate() {
            let choose = (0..k).fold(1.0, |acc, i| acc * (c - i) as f64 / (i + 1) as f64);
            *d = choose * p_dep.powi(k as i32) * (1.0 - p_dep).powi((c - k) as i32);
        }
        for x in 0..=xmax {
            // admitted-count distribution by admitting requests one at a time
            let mut admitted = vec![0.0; requests.len() + 1];
            let mut running = vec![1.0];
            admitted[0] += requests[0];
            for &pr in &requests[1..] {
                let mut next = vec![0.0; running.len() + 1];
                for (k, m) in running.iter().enumerate() {
                    let a = accepts(&config.policy, x, c + k);
                    next[k] += m * (1.0 - a);
                    next[k + 1] += m * a;
                }
                for (k, m) in next.iter().enumerate() {
                    admitted[k] += pr * m;
                }
                running = next;
            }
            let mut conn = vec![0.0; cmax + 1];
            for (k, pa) in admitted.iter().enumerate() {
                for (d, pd) in deps.iter().enumerate() {
                    let to = (c as i64 + k as i64 - d as i64).clamp(0, cmax as i64) as usize;
                    conn[to] += pa * pd;
                }
            }
            let mut queue = vec![0.0; xmax + 1];
            for (r, pr) in served_law.iter().enumerate() {
                let left = x - r.min(x);
                for (a, pa) in batch.iter().enumerate() {
                    let w = pr * pa;
                    let raw = left + a;
                    queue[raw.min(xmax)] += w;
                    drops[idx(x, c)] += w * raw.saturating_sub(xmax) as f64;
                }
            }
            for (c2, pc) in conn.iter().enumerate() {
                for (x2, pq) in queue.iter().enumerate() {
                    p[(idx(x, c), idx(x2, c2))] += pc * pq;
                }
            }
        }
    }
    // pi (P - I) = 0 with the last balance equation replaced by normalisation
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).expect("reference chain has a unique stationary law");

    let mut f = Figures {
        p_block: 0.0,
        n_connections: 0.0,
        n_queue: 0.0,
        n_drop: 0.0,
        p_drop: 0.0,
        lambda_bar: 0.0,
        throughput: 0.0,
        delay: 0.0,
    };
    for c in 0..=cmax {
        for x in 0..=xmax {
            let w = pi[idx(x, c)];
            f.p_block += w * (1.0 - accepts(&config.policy, x, c));
            f.n_connections += w * c as f64;
            f.n_queue += w * x as f64;
            f.n_drop += w * drops[idx(x, c)];
        }
    }
    f.lambda_bar = lambda * f.n_connections;
    f.p_drop = if f.lambda_bar > 0.0 { f.n_drop / f.lambda_bar } else { 0.0 };
    f.throughput = f.lambda_bar * (1.0 - f.p_drop);
    f.delay = if f.throughput > 0.0 { f.n_queue / f.throughput } else { 0.0 };
    f
}
