//! Connection admission rules.

use crate::error::{Error, Result};

/// Per-queue-length acceptance probabilities for the queue-aware rule.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptanceProfile {
    /// Accept while the queue holds fewer than `b_th` packets.
    Step { b_th: usize },
    /// Arbitrary `alpha[x]` for `x = 0..=X`.
    Table(Vec<f64>),
}

impl AcceptanceProfile {
    fn at(&self, queue_len: usize) -> f64 {
        match self {
            AcceptanceProfile::Step { b_th } => {
                if queue_len < *b_th {
                    1.0
                } else {
                    0.0
                }
            }
            AcceptanceProfile::Table(alpha) => alpha.get(queue_len).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CacPolicy {
    /// Accept while fewer than `c_max` connections are active.
    Threshold { c_max: usize },
    /// Accept with probability `alpha[x]`, hard-capped at `c_trunc` connections.
    QueueAware { alpha: AcceptanceProfile, c_trunc: usize },
    /// No admission control; the connection count is truncated at `c_trunc`.
    Unrestricted { c_trunc: usize },
}

impl CacPolicy {
    pub fn queue_aware(b_th: usize, c_trunc: usize) -> Self {
        CacPolicy::QueueAware { alpha: AcceptanceProfile::Step { b_th }, c_trunc }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CacPolicy::Threshold { .. } => "threshold",
            CacPolicy::QueueAware { .. } => "queue_aware",
            CacPolicy::Unrestricted { .. } => "unrestricted",
        }
    }

    /// Largest connection count the policy can reach (`C` or `C_tr`).
    pub fn connection_bound(&self) -> usize {
        match self {
            CacPolicy::Threshold { c_max } => *c_max,
            CacPolicy::QueueAware { c_trunc, .. } | CacPolicy::Unrestricted { c_trunc } => *c_trunc,
        }
    }

    /// Checks the policy against a queue of capacity `queue_capacity`.
    pub fn validate(&self, queue_capacity: usize) -> Result<()> {
        if let CacPolicy::QueueAware { alpha, .. } = self {
            match alpha {
                AcceptanceProfile::Step { b_th } if *b_th > queue_capacity + 1 => {
                    return Err(Error::InvalidParams(format!(
                        "b_th = {b_th} exceeds queue capacity {queue_capacity} + 1"
                    )));
                }
                AcceptanceProfile::Table(a) => {
                    if a.len() != queue_capacity + 1 {
                        return Err(Error::LengthMismatch { left: a.len(), right: queue_capacity + 1 });
                    }
                    if a.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::InvalidParams("acceptance probabilities must lie in [0, 1]".into()));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Probability that a connection arriving in state `(queue_len, connections)` is admitted.
    pub fn acceptance_probability(&self, queue_len: usize, connections: usize, queue_capacity: usize) -> Result<f64> {
        if queue_len > queue_capacity {
            return Err(Error::OutOfRange { what: "queue length", value: queue_len, max: queue_capacity });
        }
        let bound = self.connection_bound();
        if connections > bound {
            return Err(Error::OutOfRange { what: "connections", value: connections, max: bound });
        }
        Ok(self.acceptance(queue_len, connections))
    }

    /// Unchecked form of [`acceptance_probability`](Self::acceptance_probability).
    pub(crate) fn acceptance(&self, queue_len: usize, connections: usize) -> f64 {
        match self {
            CacPolicy::Threshold { c_max } => f64::from(u8::from(connections < *c_max)),
            CacPolicy::QueueAware { alpha, c_trunc } => {
                if connections < *c_trunc {
                    alpha.at(queue_len)
                } else {
                    0.0
                }
            }
            CacPolicy::Unrestricted { c_trunc } => f64::from(u8::from(connections < *c_trunc)),
        }
    }
}
