//! `asynccap`: capacity queries, Monte Carlo runs and parameter sweeps.
//!
//! Exit codes: 0 success, 2 invalid input, 3 horizon or resource limit,
//! 1 anything else (for example an unwritable output path).

mod sweep;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use asynccap::capacity::{capacity_full_sampling, BindingTerm};
use asynccap::channel::ChannelSpec;
use asynccap::sim::{run_monte_carlo, write_outcomes_csv, RunSummary, ScenarioConfig, SimError};
use clap::{Parser, Subcommand};
use serde::Serialize;

pub const BUILD_ID: &str = env!("ASYNCCAP_BUILD_ID");

#[derive(Parser)]
#[command(
    name = "asynccap",
    version,
    about = "Asynchronous communication under sampling constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity per unit cost of a channel under full sampling.
    Capacity {
        channel: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Message bits; adds the minimal-delay length n*_B to the output.
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Monte Carlo run of one scenario.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Output prefix; writes `<out>.csv` and `<out>.summary.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Runs every point of a parameter grid.
    Sweep {
        sweep: PathBuf,
        /// Output prefix; overrides the one in the sweep file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    pub fn input(err: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            err: err.into(),
        }
    }

    pub fn other(err: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            err: err.into(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = if e.is_horizon() { 3 } else { 2 };
        Failure { code, err: e.into() }
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

/// Opens `path` for writing, creating parent directories.
pub fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::other)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::other)
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create_output(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Failure::other)?;
    writeln!(w).and_then(|_| w.flush()).map_err(Failure::other)
}

fn init_threads(threads: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(Failure::other)
}

#[derive(Serialize)]
struct CapacityReport {
    beta: f64,
    c_value: f64,
    binding_term: BindingTerm,
    p_star: Vec<f64>,
    p_delay: Vec<f64>,
    expected_cost: f64,
    cost_band: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    b_bits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_star: Option<u64>,
}

fn cmd_capacity(channel: &Path, beta: f64, bits: Option<u32>, tolerance: f64) -> CliResult<()> {
    let text = read_input(channel)?;
    let spec: ChannelSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", channel.display()))
        .map_err(Failure::input)?;
    let dmc = spec
        .build()
        .with_context(|| format!("invalid channel {}", channel.display()))
        .map_err(Failure::input)?;
    let cap = capacity_full_sampling(&dmc, beta, tolerance).map_err(Failure::input)?;
    let n_star = match bits {
        Some(b) if cap.c_value > 0.0 => Some(cap.n_star(b).map_err(Failure::input)?),
        _ => None,
    };
    let report = CapacityReport {
        beta,
        c_value: cap.c_value,
        binding_term: cap.binding_term,
        p_star: cap.p_star.probs().to_vec(),
        p_delay: cap.p_delay.probs().to_vec(),
        expected_cost: cap.expected_cost,
        cost_band: cap.cost_band,
        b_bits: bits,
        n_star,
    };
    let json = serde_json::to_string_pretty(&report).map_err(Failure::other)?;
    println!("{json}");
    Ok(())
}

pub fn load_scenario(path: &Path) -> CliResult<ScenarioConfig> {
    let text = read_input(path)?;
    ScenarioConfig::from_json(&text).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))
}

fn default_prefix(input: &Path) -> PathBuf {
    PathBuf::from(input.file_stem().unwrap_or(input.as_os_str()))
}

struct SimulateArgs {
    seed: Option<u64>,
    trials: Option<u64>,
    out: Option<PathBuf>,
    epsilon: Option<f64>,
}

fn cmd_simulate(scenario: &Path, args: SimulateArgs) -> CliResult<()> {
    let mut cfg = load_scenario(scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    cfg.validate()?;

    let start = Instant::now();
    let mc = run_monte_carlo(&cfg)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let prefix = args.out.unwrap_or_else(|| default_prefix(scenario));
    let csv_path = with_suffix(&prefix, ".csv");
    let summary_path = with_suffix(&prefix, ".summary.json");
    let w = create_output(&csv_path)?;
    write_outcomes_csv(w, &mc.outcomes).map_err(Failure::other)?;
    let m = &mc.metrics;
    let summary = RunSummary {
        config: cfg,
        scenario: mc.info,
        metrics: mc.metrics.clone(),
        build_id: BUILD_ID.to_string(),
        wall_time_s,
    };
    write_json(&summary_path, &summary)?;

    println!(
        "n = {}, A = {}: error {:.4} [{:.4}, {:.4}], rho_hat {:.4}, d_hat {}, median delay {}",
        summary.scenario.n,
        summary.scenario.a,
        m.error_prob,
        m.error_ci95.0,
        m.error_ci95.1,
        m.rho_hat,
        m.d_hat,
        m.delay.p50
    );
    println!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Capacity {
            channel,
            beta,
            bits,
            tolerance,
        } => cmd_capacity(&channel, beta, bits, tolerance),
        Command::Simulate {
            scenario,
            seed,
            trials,
            out,
            threads,
            epsilon,
        } => {
            init_threads(threads)?;
            cmd_simulate(
                &scenario,
                SimulateArgs {
                    seed,
                    trials,
                    out,
                    epsilon,
                },
            )
        }
        Command::Sweep { sweep, out, threads } => {
            init_threads(threads)?;
            sweep::cmd_sweep(&sweep, out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
