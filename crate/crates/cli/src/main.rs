//! `cacperf`: solve, sweep, simulate and cross-check the admission-control queue model.
//!
//! Exit codes: 0 ok, 1 configuration or input error, 2 solver did not converge,
//! 3 analytical and simulated figures disagree.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use cac_model::config::{load_system, ConfigFile};
use cac_model::exec::Execution;
use cac_model::experiment::{
    compare_reports, fmt_sig, parse_policies, report_csv, report_text, run_sweep, sweep_charts, sweep_csv, RowOutcome,
    SweepSpec,
};
use cac_model::metrics::report_from;
use cac_model::simulate::{self, SimOptions};
use cac_model::Error;
use clap::{Parser, Subcommand};

const THREADS_VAR: &str = "CAC_THREADS";

#[derive(Parser)]
#[command(name = "cacperf", version, about = "Uplink queue model under connection admission control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the chain and print the performance figures.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
        /// Also write a single-row CSV of the figures.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve over a grid of one parameter for several policies.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Dotted key into the configuration, e.g. `connections.arrival_rate_per_min`.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Comma-separated policy names; defaults to the configured one.
        #[arg(long)]
        policies: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
        /// Write one SVG chart per metric into this directory.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the frame-level simulator.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        seed: u64,
        /// Per-frame CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare the analytical figures with a simulation run.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let outcome = match cli.command {
        Command::Solve { config, csv } => solve(&config, csv.as_deref()),
        Command::Sweep { config, param, from, to, steps, policies, output, svg } => {
            sweep(&config, param, from, to, steps, policies.as_deref(), &output, svg.as_deref())
        }
        Command::Simulate { config, frames, seed, trace } => simulate(&config, frames, seed, trace.as_deref()),
        Command::Compare { config, frames, seed } => compare(&config, frames, seed),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotConverged { .. } => 2,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn execution() -> Execution {
    if rayon::current_num_threads() > 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

fn write_file(path: &Path, contents: &str) -> cac_model::Result<()> {
    Ok(fs::write(path, contents)?)
}

fn solve(path: &Path, csv: Option<&Path>) -> cac_model::Result<ExitCode> {
    let config = load_system(path)?;
    let start = Instant::now();
    let (op, steady) = cac_model::chain::solve_model_with(&config, execution())?;
    let report = report_from(&config, &op, &steady)?;
    let elapsed = start.elapsed();
    print!("{}", report_text(&report));
    println!("{:<14} {:e}", "residual", steady.residual);
    println!("{:<14} {}", "sweeps", steady.sweeps_used);
    println!("{:<14} {:.3}s", "wall_time", elapsed.as_secs_f64());
    if let Some(out) = csv {
        write_file(out, &report_csv(&report))?;
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    path: &Path,
    param: String,
    from: f64,
    to: f64,
    steps: usize,
    policies: Option<&str>,
    output: &Path,
    svg: Option<&Path>,
) -> cac_model::Result<ExitCode> {
    let file = ConfigFile::load(path)?;
    let policies = match policies {
        Some(list) => parse_policies(list)?,
        None => vec![file.policy.kind],
    };
    // Round-trip through the typed schema so defaulted keys are sweepable too.
    let doc = serde_json::to_value(&file).map_err(|e| Error::config("<root>", e.to_string()))?;
    let spec = SweepSpec { parameter_path: param.clone(), from, to, steps, policies };
    let rows = run_sweep(&doc, &spec, execution())?;
    write_file(output, &sweep_csv(&rows))?;
    if let Some(dir) = svg {
        fs::create_dir_all(dir)?;
        for (metric, chart) in sweep_charts(&rows, &param) {
            write_file(&dir.join(format!("{metric}.svg")), &chart)?;
        }
    }
    let mut failed = false;
    for row in &rows {
        if let RowOutcome::NotConverged { residual } = row.outcome {
            failed = true;
            eprintln!(
                "warning: {} = {} with {} did not converge (residual {residual:e})",
                param,
                fmt_sig(row.sweep_value),
                row.policy.name()
            );
        }
    }
    eprintln!("wrote {} rows to {}", rows.len(), output.display());
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn simulate(path: &Path, frames: u64, seed: u64, trace: Option<&Path>) -> cac_model::Result<ExitCode> {
    let config = load_system(path)?;
    let options = SimOptions::default();
    let result = match trace {
        Some(p) => {
            let file = fs::File::create(p)?;
            let mut w = BufWriter::new(file);
            let r = simulate::run_with(&config, frames, seed, &options, Some(&mut w))?;
            w.flush()?;
            r
        }
        None => simulate::run_with(&config, frames, seed, &options, None)?,
    };
    println!("{:<14} {:>20} {:>20}", "metric", "mean", "std_err");
    let rows = [
        ("p_block", result.p_block),
        ("n_connections", result.n_connections),
        ("n_queue", result.n_queue),
        ("n_drop", result.n_drop),
        ("p_drop", result.p_drop),
        ("lambda_bar", result.lambda_bar),
        ("throughput", result.throughput),
        ("delay", result.delay),
    ];
    for (name, est) in rows {
        println!("{name:<14} {:>20} {:>20}", fmt_sig(est.mean), fmt_sig(est.std_err));
    }
    println!("{:<14} {:>20}", "little_delay", fmt_sig(result.little_delay()));
    println!("frames {} seed {}", result.frames_run, result.seed);
    Ok(ExitCode::SUCCESS)
}

fn compare(path: &Path, frames: u64, seed: u64) -> cac_model::Result<ExitCode> {
    let config = load_system(path)?;
    let (op, steady) = cac_model::chain::solve_model_with(&config, execution())?;
    let analytic = report_from(&config, &op, &steady)?;
    let sim = simulate::run(&config, frames, seed)?;
    let comparison = compare_reports(&analytic, sim);
    print!("{}", comparison.table());
    Ok(if comparison.passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
