//! Experiment orchestration: parameter sweeps, analytical-vs-simulated comparison,
//! and their text, CSV and SVG renderings.

use std::fmt::Write as _;

use serde_json::Value;

use crate::chain::solve_model_with;
use crate::config::{set_path, ConfigFile, PolicyKind};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::metrics::{report_from, PerformanceReport};
use crate::simulate::{self, Estimate, SimResult};
use crate::SystemConfig;

pub const CSV_HEADER: &str = "sweep_value,policy,p_block,n_connections,n_queue,p_drop,throughput,delay,residual";

/// Formats with 12 significant digits in fixed-point notation.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (DIGITS - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // log10 rounding near powers of ten can leave a 13th digit; harmless but trim zeros.
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".to_string() } else { t.to_string() }
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Dotted key into the configuration document.
    pub parameter_path: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub policies: Vec<PolicyKind>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidParams("sweep needs at least 2 steps".into()));
        }
        if !(self.from < self.to) {
            return Err(Error::InvalidParams("sweep needs from < to".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidParams("sweep needs at least one policy".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let span = self.to - self.from;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.to } else { self.from + span * k as f64 / (self.steps - 1) as f64 })
            .collect()
    }
}

/// Parses a comma-separated policy list such as `threshold,queue_aware`.
pub fn parse_policies(list: &str) -> Result<Vec<PolicyKind>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| PolicyKind::parse(s).ok_or_else(|| Error::InvalidParams(format!("unknown policy `{}`", s.trim()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Solved(PerformanceReport),
    NotConverged { residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub policy: PolicyKind,
    pub outcome: RowOutcome,
}

impl SweepRow {
    pub fn report(&self) -> Option<&PerformanceReport> {
        match &self.outcome {
            RowOutcome::Solved(r) => Some(r),
            RowOutcome::NotConverged { .. } => None,
        }
    }

    pub fn residual(&self) -> f64 {
        match &self.outcome {
            RowOutcome::Solved(r) => r.diagnostics.residual,
            RowOutcome::NotConverged { residual } => *residual,
        }
    }
}

/// Configuration for one grid point: the swept key set, then the policy chosen.
pub fn sweep_point(doc: &Value, spec: &SweepSpec, value: f64, policy: PolicyKind) -> Result<SystemConfig> {
    let mut doc = doc.clone();
    set_path(&mut doc, &spec.parameter_path, Value::from(value))?;
    set_path(&mut doc, "policy.type", Value::from(policy.name()))?;
    ConfigFile::from_value(doc)?.to_system()
}

/// Solves every (grid value, policy) pair; rows come back in grid order, policies in
/// the order given, regardless of which finished first.
pub fn run_sweep(doc: &Value, spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let grid = spec.grid();
    let jobs: Vec<(f64, PolicyKind)> = grid.iter().flat_map(|v| spec.policies.iter().map(move |p| (*v, *p))).collect();
    // Validate every point up front so config errors are not reported as solver failures.
    let configs = jobs.iter().map(|(v, p)| sweep_point(doc, spec, *v, *p)).collect::<Result<Vec<_>>>()?;
    // Grid points run in parallel; each solve inside stays sequential.
    let results = map_range(exec, jobs.len(), |k| {
        let config = &configs[k];
        let outcome = match solve_model_with(config, Execution::Sequential) {
            Ok((op, steady)) => RowOutcome::Solved(report_from(config, &op, &steady)?),
            Err(Error::NotConverged { residual, .. }) => RowOutcome::NotConverged { residual },
            Err(e) => return Err(e),
        };
        Ok(SweepRow { sweep_value: jobs[k].0, policy: jobs[k].1, outcome })
    });
    results.into_iter().collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = match row.report() {
            Some(r) => [r.p_block, r.n_connections, r.n_queue, r.p_drop, r.throughput, r.delay].iter().map(|v| fmt_sig(*v)).collect(),
            None => vec!["nan".to_string(); 6],
        };
        let _ = writeln!(out, "{},{},{},{}", fmt_sig(row.sweep_value), row.policy.name(), cells.join(","), fmt_sig(row.residual()));
    }
    out
}

/// Key-value rendering of a report, one figure per line.
pub fn report_text(r: &PerformanceReport) -> String {
    let mut out = String::new();
    for (k, v) in report_fields(r) {
        let _ = writeln!(out, "{k:<14} {}", fmt_sig(v));
    }
    out
}

/// The eight headline figures in display order.
pub fn report_fields(r: &PerformanceReport) -> [(&'static str, f64); 8] {
    [
        ("p_block", r.p_block),
        ("n_connections", r.n_connections),
        ("n_queue", r.n_queue),
        ("n_drop", r.n_drop),
        ("p_drop", r.p_drop),
        ("lambda_bar", r.lambda_bar),
        ("throughput", r.throughput),
        ("delay", r.delay),
    ]
}

pub fn report_csv(r: &PerformanceReport) -> String {
    let fields = report_fields(r);
    let header: Vec<&str> = fields.iter().map(|f| f.0).chain(["exact_arrival_rate", "exact_service_rate", "residual"]).collect();
    let values: Vec<String> = fields
        .iter()
        .map(|f| f.1)
        .chain([r.diagnostics.exact_arrival_rate, r.diagnostics.exact_service_rate, r.diagnostics.residual])
        .map(fmt_sig)
        .collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

/// |z| above which an analytical figure is declared inconsistent with simulation.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub metric: &'static str,
    pub analytic: f64,
    pub simulated: Estimate,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub sim: SimResult,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.z <= Z_LIMIT)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>20} {:>20} {:>20} {:>10}", "metric", "analytic", "simulated", "std_err", "|z|");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>20} {:>20} {:>20} {:>10.3}",
                r.metric,
                fmt_sig(r.analytic),
                fmt_sig(r.simulated.mean),
                fmt_sig(r.simulated.std_err),
                r.z
            );
        }
        let _ = writeln!(out, "frames {} seed {} verdict {}", self.sim.frames_run, self.sim.seed, if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

pub fn z_score(analytic: f64, est: &Estimate) -> f64 {
    let diff = (analytic - est.mean).abs();
    if est.std_err > 0.0 {
        diff / est.std_err
    } else if diff <= 1e-12 * analytic.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Lines up the six compared metrics of an analytical report against a simulation.
pub fn compare_reports(analytic: &PerformanceReport, sim: SimResult) -> Comparison {
    let pairs = [
        ("p_block", analytic.p_block, sim.p_block),
        ("n_connections", analytic.n_connections, sim.n_connections),
        ("n_queue", analytic.n_queue, sim.n_queue),
        ("p_drop", analytic.p_drop, sim.p_drop),
        ("throughput", analytic.throughput, sim.throughput),
        ("delay", analytic.delay, sim.delay),
    ];
    let rows = pairs.into_iter().map(|(metric, a, s)| CompareRow { metric, analytic: a, simulated: s, z: z_score(a, &s) }).collect();
    Comparison { rows, sim }
}

/// Solves `config` and simulates it for `frames` frames with `seed`.
pub fn compare(config: &SystemConfig, frames: u64, seed: u64) -> Result<Comparison> {
    let analytic = crate::metrics::evaluate(config)?;
    let sim = simulate::run(config, frames, seed)?;
    Ok(compare_reports(&analytic, sim))
}

/// Minimal SVG line chart: one polyline per series over a shared x axis.
pub fn svg_line_chart(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let pts = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 0.5 * y0.abs().max(1e-12);
        y1 += 0.5 * y1.abs().max(1e-12);
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, xml_escape(title));
    let _ = writeln!(out, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(out, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 15.0, xml_escape(x_label));
    for (v, y) in [(y0, H - M), (y1, M)] {
        let _ = writeln!(out, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{}</text>"#, M - 4.0, fmt_short(v));
    }
    for (v, x) in [(x0, M), (x1, W - M)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, H - M + 14.0, fmt_short(v));
    }
    for (k, (name, points)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            W - M - 100.0,
            M + 14.0 * (k as f64 + 1.0),
            xml_escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_short(v: f64) -> String {
    format!("{v:.4e}")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

type Metric = (&'static str, fn(&PerformanceReport) -> f64);

/// One chart per swept metric, keyed by metric name.
pub fn sweep_charts(rows: &[SweepRow], x_label: &str) -> Vec<(&'static str, String)> {
    let metrics: [Metric; 6] = [
        ("p_block", |r| r.p_block),
        ("n_connections", |r| r.n_connections),
        ("n_queue", |r| r.n_queue),
        ("p_drop", |r| r.p_drop),
        ("throughput", |r| r.throughput),
        ("delay", |r| r.delay),
    ];
    let mut policies: Vec<PolicyKind> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy) {
            policies.push(r.policy);
        }
    }
    metrics
        .iter()
        .map(|(name, get)| {
            let series: Vec<(String, Vec<(f64, f64)>)> = policies
                .iter()
                .map(|p| {
                    let pts = rows
                        .iter()
                        .filter(|r| r.policy == *p)
                        .map(|r| (r.sweep_value, r.report().map_or(f64::NAN, get)))
                        .collect();
                    (p.name().to_string(), pts)
                })
                .collect();
            (*name, svg_line_chart(name, x_label, &series))
        })
        .collect()
}
