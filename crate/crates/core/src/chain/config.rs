use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::mmpp::MmppParams;
use crate::policy::CacPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// In-place Gauss–Seidel sweeps (sequential).
    #[default]
    GaussSeidel,
    /// Power iteration `pi <- pi P`; row updates may run in parallel and are
    /// bit-identical for any thread count.
    Power,
    /// Dense GTH elimination, for small chains only.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Target L1 norm of `pi P - pi`.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub method: SolverMethod,
    /// Interleave aggregation/disaggregation over (phase, connections) blocks with the sweeps.
    pub aggregate: bool,
    /// Ceiling for explicit sparse storage, in megabytes.
    pub memory_budget_mb: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_sweeps: 20_000, method: SolverMethod::GaussSeidel, aggregate: true, memory_budget_mb: 512 }
    }
}

/// Everything needed to build the chain for one subscriber-station queue.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub mmpp: MmppParams,
    pub channel: ChannelParams,
    pub policy: CacPolicy,
    /// Queue capacity `X`, packets.
    pub queue_capacity: usize,
    /// Cap `A` on aggregate packet arrivals per frame.
    pub max_batch: usize,
    /// Connection arrival rate, per minute.
    pub conn_arrival_rate: f64,
    /// Mean connection holding time, minutes.
    pub conn_mean_duration: f64,
    /// Frame length, milliseconds.
    pub frame_duration_ms: f64,
    pub solver: SolverOptions,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.queue_capacity < 1 {
            return Err(Error::InvalidParams("queue capacity must be >= 1".into()));
        }
        if self.max_batch < 1 {
            return Err(Error::InvalidParams("max batch must be >= 1".into()));
        }
        if !(self.conn_arrival_rate >= 0.0 && self.conn_arrival_rate.is_finite()) {
            return Err(Error::InvalidParams("connection arrival rate must be >= 0".into()));
        }
        if !(self.conn_mean_duration > 0.0 && self.conn_mean_duration.is_finite()) {
            return Err(Error::InvalidParams("mean connection duration must be > 0".into()));
        }
        if !(self.frame_duration_ms > 0.0 && self.frame_duration_ms.is_finite()) {
            return Err(Error::InvalidParams("frame duration must be > 0".into()));
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_sweeps == 0 {
            return Err(Error::InvalidParams("solver needs tolerance > 0 and max_sweeps >= 1".into()));
        }
        self.policy.validate(self.queue_capacity)
    }

    /// Frame length in minutes, the unit of the rate parameters.
    pub fn frame_minutes(&self) -> f64 {
        self.frame_duration_ms / 60_000.0
    }

    /// Mean connection arrivals per frame.
    pub fn conn_arrivals_per_frame(&self) -> f64 {
        self.conn_arrival_rate * self.frame_minutes()
    }

    /// Probability that an active connection ends within one frame.
    pub fn departure_probability(&self) -> f64 {
        -(-self.frame_minutes() / self.conn_mean_duration).exp_m1()
    }

    /// Offered connection load in Erlangs.
    pub fn offered_load(&self) -> f64 {
        self.conn_arrival_rate * self.conn_mean_duration
    }

    pub fn with_policy(&self, policy: CacPolicy) -> Self {
        Self { policy, ..self.clone() }
    }
}
