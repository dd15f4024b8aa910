//! JSON configuration files.
//!
//! Units live in key names: rates `_per_min` or `_per_frame`, times `_ms` / `_min`,
//! SNR `_db`. A rate-table threshold of `null` stands for minus infinity. Integer
//! fields are read as signed values so that out-of-range input is reported against
//! its key path instead of as a generic type error.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chain::{SolverMethod, SolverOptions, SystemConfig};
use crate::channel::{ChannelParams, RateLevel};
use crate::error::{Error, Result};
use crate::mmpp::MmppParams;
use crate::policy::CacPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub mmpp: MmppSection,
    pub channel: ChannelSection,
    pub policy: PolicySection,
    pub queue: QueueSection,
    pub connections: ConnectionSection,
    pub frame_duration_ms: f64,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmppSection {
    pub generator_per_min: Vec<Vec<f64>>,
    pub arrival_rates_per_frame: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub subchannel_count: i64,
    pub avg_snr_db: f64,
    #[serde(default = "default_nakagami")]
    pub nakagami_m: f64,
    pub rate_table: Vec<RateEntry>,
}

fn default_nakagami() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub min_snr_db: Option<f64>,
    pub packets_per_frame: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Threshold,
    QueueAware,
    Unrestricted,
}

impl PolicyKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim() {
            "threshold" => Some(Self::Threshold),
            "queue_aware" => Some(Self::QueueAware),
            "unrestricted" => Some(Self::Unrestricted),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Threshold => "threshold",
            Self::QueueAware => "queue_aware",
            Self::Unrestricted => "unrestricted",
        }
    }
}

/// Parameters for every rule may sit side by side; `type` selects the active one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(rename = "type")]
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_max: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_th: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_trunc: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSection {
    pub capacity: i64,
    pub max_batch: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSection {
    pub arrival_rate_per_min: f64,
    pub mean_duration_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    GaussSeidel,
    Power,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tolerance: f64,
    pub max_sweeps: i64,
    pub method: MethodName,
    pub aggregate: bool,
    pub memory_budget_mb: i64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tolerance: d.tolerance,
            max_sweeps: d.max_sweeps as i64,
            method: MethodName::GaussSeidel,
            aggregate: d.aggregate,
            memory_budget_mb: d.memory_budget_mb as i64,
        }
    }
}

fn non_negative(path: &str, v: i64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::config(path, format!("must be >= 0, got {v}")))
}

fn at_least_one(path: &str, v: i64) -> Result<usize> {
    if v < 1 {
        return Err(Error::config(path, format!("must be >= 1, got {v}")));
    }
    Ok(v as usize)
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(path, format!("must be a positive number, got {v}")));
    }
    Ok(v)
}

fn at_path(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        e @ Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

impl ConfigFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn policy_for(&self, kind: PolicyKind) -> Result<CacPolicy> {
        let need = |v: Option<i64>, key: &str| {
            let path = format!("policy.{key}");
            let v = v.ok_or_else(|| Error::config(&path, format!("required by the {} policy", kind.name())))?;
            non_negative(&path, v)
        };
        Ok(match kind {
            PolicyKind::Threshold => CacPolicy::Threshold { c_max: need(self.policy.c_max, "c_max")? },
            PolicyKind::QueueAware => CacPolicy::queue_aware(need(self.policy.b_th, "b_th")?, need(self.policy.c_trunc, "c_trunc")?),
            PolicyKind::Unrestricted => CacPolicy::Unrestricted { c_trunc: need(self.policy.c_trunc, "c_trunc")? },
        })
    }

    /// Validates every field and builds the model configuration.
    pub fn to_system(&self) -> Result<SystemConfig> {
        let queue_capacity = at_least_one("queue.capacity", self.queue.capacity)?;
        let max_batch = at_least_one("queue.max_batch", self.queue.max_batch)?;

        let mmpp = MmppParams::new(&self.mmpp.generator_per_min, self.mmpp.arrival_rates_per_frame.clone())
            .map_err(at_path("mmpp"))?;

        let mut table = Vec::with_capacity(self.channel.rate_table.len());
        for (k, e) in self.channel.rate_table.iter().enumerate() {
            let packets = non_negative(&format!("channel.rate_table[{k}].packets_per_frame"), e.packets_per_frame)?;
            let min_snr_db = match (k, e.min_snr_db) {
                (0, None) => f64::NEG_INFINITY,
                (0, Some(_)) => {
                    return Err(Error::config("channel.rate_table[0].min_snr_db", "first level must be null (-inf)"));
                }
                (_, None) => return Err(Error::config(format!("channel.rate_table[{k}].min_snr_db"), "missing threshold")),
                (_, Some(v)) => v,
            };
            table.push(RateLevel { min_snr_db, packets_per_frame: packets });
        }
        let channel = ChannelParams::new(
            at_least_one("channel.subchannel_count", self.channel.subchannel_count)?,
            self.channel.avg_snr_db,
            self.channel.nakagami_m,
            table,
        )
        .map_err(at_path("channel"))?;

        let policy = self.policy_for(self.policy.kind)?;
        policy.validate(queue_capacity).map_err(at_path("policy"))?;

        let rate = self.connections.arrival_rate_per_min;
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::config("connections.arrival_rate_per_min", format!("must be >= 0, got {rate}")));
        }
        let tolerance = positive("solver.tolerance", self.solver.tolerance)?;
        let solver = SolverOptions {
            tolerance,
            max_sweeps: at_least_one("solver.max_sweeps", self.solver.max_sweeps)?,
            method: match self.solver.method {
                MethodName::GaussSeidel => SolverMethod::GaussSeidel,
                MethodName::Power => SolverMethod::Power,
                MethodName::Direct => SolverMethod::Direct,
            },
            aggregate: self.solver.aggregate,
            memory_budget_mb: non_negative("solver.memory_budget_mb", self.solver.memory_budget_mb)?,
        };
        let config = SystemConfig {
            mmpp,
            channel,
            policy,
            queue_capacity,
            max_batch,
            conn_arrival_rate: rate,
            conn_mean_duration: positive("connections.mean_duration_min", self.connections.mean_duration_min)?,
            frame_duration_ms: positive("frame_duration_ms", self.frame_duration_ms)?,
            solver,
        };
        config.validate().map_err(at_path("<root>"))?;
        Ok(config)
    }
}

/// Sets a dotted key (`a.b.c`, array elements as `a.0`) in a JSON document.
pub fn set_path(doc: &mut Value, path: &str, new: Value) -> Result<()> {
    let mut cur = doc;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::config(path, "no such key in the configuration"))?;
    }
    *cur = new;
    Ok(())
}

/// Loads a configuration file and builds the model configuration.
pub fn load_system(path: impl AsRef<Path>) -> Result<SystemConfig> {
    ConfigFile::load(path)?.to_system()
}
