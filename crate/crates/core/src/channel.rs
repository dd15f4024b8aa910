//! Per-frame service capacity of the allocated OFDMA subchannels.
//!
//! Each subchannel sees an instantaneous SNR drawn from a Nakagami-m fading model
//! (Gamma-distributed power with shape `m` and the configured mean). Adaptive
//! modulation picks the highest rate level whose threshold is not above the SNR.
//! Subchannels fade independently and identically, and the channel is redrawn every
//! frame.

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::pmf::Pmf;

/// One adaptive modulation and coding level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLevel {
    /// Minimum SNR for this level, dB. The first level uses `-inf`.
    pub min_snr_db: f64,
    pub packets_per_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    subchannel_count: usize,
    avg_snr_db: f64,
    nakagami_m: f64,
    rate_table: Vec<RateLevel>,
}

impl ChannelParams {
    pub fn new(subchannel_count: usize, avg_snr_db: f64, nakagami_m: f64, rate_table: Vec<RateLevel>) -> Result<Self> {
        if subchannel_count == 0 {
            return Err(Error::InvalidParams("subchannel_count must be >= 1".into()));
        }
        if avg_snr_db.is_nan() {
            return Err(Error::InvalidParams("avg_snr_db is NaN".into()));
        }
        if !(nakagami_m >= 0.5 && nakagami_m.is_finite()) {
            return Err(Error::InvalidParams(format!("nakagami_m = {nakagami_m} must be >= 0.5")));
        }
        let first = rate_table.first().ok_or_else(|| Error::InvalidParams("rate table is empty".into()))?;
        if first.min_snr_db != f64::NEG_INFINITY {
            return Err(Error::InvalidParams("first rate level must have threshold -inf".into()));
        }
        for w in rate_table.windows(2) {
            if !(w[1].min_snr_db > w[0].min_snr_db) || w[1].min_snr_db.is_infinite() {
                return Err(Error::InvalidParams("rate thresholds must be finite and strictly increasing".into()));
            }
            if w[1].packets_per_frame <= w[0].packets_per_frame {
                return Err(Error::InvalidParams("packets_per_frame must be strictly increasing".into()));
            }
        }
        Ok(Self { subchannel_count, avg_snr_db, nakagami_m, rate_table })
    }

    pub fn subchannel_count(&self) -> usize {
        self.subchannel_count
    }

    pub fn avg_snr_db(&self) -> f64 {
        self.avg_snr_db
    }

    pub fn nakagami_m(&self) -> f64 {
        self.nakagami_m
    }

    pub fn rate_table(&self) -> &[RateLevel] {
        &self.rate_table
    }

    pub fn with_avg_snr_db(&self, avg_snr_db: f64) -> Self {
        Self { avg_snr_db, ..self.clone() }
    }

    /// Most packets a single subchannel can carry in one frame.
    pub fn max_packets_per_subchannel(&self) -> usize {
        self.rate_table.last().map_or(0, |l| l.packets_per_frame)
    }

    /// Rate level selected for an instantaneous linear SNR.
    pub fn level_for_snr(&self, snr_linear: f64) -> &RateLevel {
        let idx = self
            .rate_table
            .iter()
            .rposition(|l| l.min_snr_db == f64::NEG_INFINITY || db_to_linear(l.min_snr_db) <= snr_linear)
            .unwrap_or(0);
        &self.rate_table[idx]
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// P(SNR >= threshold) for Gamma(shape m, mean `mean`) instantaneous SNR.
fn snr_survival(threshold: f64, mean: f64, m: f64) -> f64 {
    if threshold <= 0.0 || mean == f64::INFINITY {
        1.0
    } else if mean <= 0.0 {
        0.0
    } else {
        gamma_ur(m, m * threshold / mean)
    }
}

/// Distribution of packets carried by one subchannel in one frame.
pub fn subchannel_rate_pmf(params: &ChannelParams) -> Pmf {
    let mean = db_to_linear(params.avg_snr_db);
    let levels = &params.rate_table;
    let survival: Vec<f64> = levels
        .iter()
        .map(|l| if l.min_snr_db == f64::NEG_INFINITY { 1.0 } else { snr_survival(db_to_linear(l.min_snr_db), mean, params.nakagami_m) })
        .collect();
    let mut probs = vec![0.0; params.max_packets_per_subchannel() + 1];
    for (n, level) in levels.iter().enumerate() {
        let upper = survival.get(n + 1).copied().unwrap_or(0.0);
        probs[level.packets_per_frame] += (survival[n] - upper).max(0.0);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Pmf::from_raw(probs)
}

/// Distribution of the total packets served per frame over all subchannels.
pub fn service_pmf(params: &ChannelParams) -> Pmf {
    subchannel_rate_pmf(params).convolve_power(params.subchannel_count)
}
