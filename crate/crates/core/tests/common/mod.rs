//! Shared fixtures for the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod reference;

use std::path::{Path, PathBuf};

use cac_model::channel::{ChannelParams, RateLevel};
use cac_model::chain::{SolverOptions, SystemConfig};
use cac_model::config::load_system;
use cac_model::mmpp::MmppParams;
use cac_model::CacPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// S=2, X=20, C=3 configuration with rates scaled so every coordinate moves often.
pub fn toy() -> SystemConfig {
    load_system(configs_dir().join("toy.json")).expect("toy config loads")
}

pub fn table1() -> SystemConfig {
    load_system(configs_dir().join("table1.json")).expect("reference config loads")
}

pub fn rate_table(levels: &[(f64, usize)]) -> Vec<RateLevel> {
    levels.iter().map(|&(min_snr_db, packets_per_frame)| RateLevel { min_snr_db, packets_per_frame }).collect()
}

pub fn default_rate_table() -> Vec<RateLevel> {
    rate_table(&[(f64::NEG_INFINITY, 0), (3.0, 1), (9.0, 2), (15.0, 4)])
}

/// Threshold system with one phase, for connection-level and Poisson-batch checks.
pub fn single_phase(
    lambda: f64,
    queue_capacity: usize,
    max_batch: usize,
    policy: CacPolicy,
    rho_per_min: f64,
    duration_min: f64,
    frame_ms: f64,
) -> SystemConfig {
    SystemConfig {
        mmpp: MmppParams::poisson(lambda).unwrap(),
        channel: ChannelParams::new(1, 5.0, 1.0, default_rate_table()).unwrap(),
        policy,
        queue_capacity,
        max_batch,
        conn_arrival_rate: rho_per_min,
        conn_mean_duration: duration_min,
        frame_duration_ms: frame_ms,
        solver: SolverOptions::default(),
    }
}

/// A random valid configuration: S <= 4, X <= 30, connection bound <= 5.
pub fn random_config(seed: u64) -> SystemConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases = rng.random_range(1..=4usize);
    let mut generator = vec![vec![0.0; phases]; phases];
    for (i, row) in generator.iter_mut().enumerate() {
        for (j, q) in row.iter_mut().enumerate() {
            if i != j {
                *q = if rng.random_bool(0.5) { rng.random_range(0.0..3.0) } else { 0.0 };
            }
        }
        // a cycle through all phases keeps the generator irreducible
        if phases > 1 {
            row[(i + 1) % phases] += rng.random_range(0.1..2.0);
        }
    }
    let rates: Vec<f64> = (0..phases).map(|_| rng.random_range(0.0..2.0)).collect();
    let queue_capacity = rng.random_range(1..=30usize);
    let bound = rng.random_range(1..=5usize);
    let policy = match rng.random_range(0..3) {
        0 => CacPolicy::Threshold { c_max: bound },
        1 => CacPolicy::queue_aware(rng.random_range(0..=queue_capacity + 1), bound),
        _ => CacPolicy::Unrestricted { c_trunc: bound },
    };
    // at least one serving level, otherwise a full queue can never drain and the
    // chain has many closed classes
    let levels = rng.random_range(2..=4usize);
    let table = default_rate_table()[..levels].to_vec();
    SystemConfig {
        mmpp: MmppParams::new(&generator, rates).unwrap(),
        channel: ChannelParams::new(
            rng.random_range(1..=3usize),
            rng.random_range(-5.0..25.0),
            rng.random_range(0.5..3.0),
            table,
        )
        .unwrap(),
        policy,
        queue_capacity,
        max_batch: rng.random_range(1..=12usize),
        conn_arrival_rate: rng.random_range(0.0..30.0),
        conn_mean_duration: rng.random_range(0.05..2.0),
        frame_duration_ms: rng.random_range(5.0..100.0),
        solver: SolverOptions::default(),
    }
}

/// Desk-sized two-phase system where the three policies differ.
pub fn desk() -> SystemConfig {
    let mut c = toy();
    c.policy = CacPolicy::Threshold { c_max: 3 };
    c
}

pub fn desk_policies() -> [CacPolicy; 3] {
    [CacPolicy::Threshold { c_max: 3 }, CacPolicy::queue_aware(6, 6), CacPolicy::Unrestricted { c_trunc: 6 }]
}

/// Erlang-B blocking by the standard recursion.
pub fn erlang_b(load: f64, servers: usize) -> f64 {
    (1..=servers).fold(1.0, |b, k| load * b / (k as f64 + load * b))
}

/// Poisson(load) restricted to `0..=servers` and renormalised.
pub fn truncated_poisson(load: f64, servers: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for k in 1..=servers {
        let prev = w[k - 1];
        w.push(prev * load / k as f64);
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
