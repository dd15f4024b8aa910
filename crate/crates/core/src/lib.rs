//! Analytical model of a subscriber station's uplink queue under connection admission
//! control.
//!
//! Packet traffic per connection is a Markov-modulated Poisson process, service comes
//! from adaptively modulated OFDMA subchannels, and connections arrive and leave as a
//! Poisson / exponential process filtered by one of three admission rules. The joint
//! process `(phase, queue length, connections)` is a discrete-time Markov chain stepped
//! once per frame; [`chain`] builds and solves it, [`metrics`] turns the stationary
//! distribution into blocking, queueing and loss figures, and [`simulate`] replays the
//! same dynamics by sampling so every analytical number can be cross-checked.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod channel;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod mmpp;
pub mod pmf;
pub mod policy;
pub mod simulate;

pub use chain::{solve_model, SystemConfig};
pub use error::{Error, Result};
pub use metrics::PerformanceReport;
pub use policy::CacPolicy;
