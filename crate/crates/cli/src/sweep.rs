//! Cartesian parameter sweeps over a base scenario.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use asynccap::sampling::Scheme;
use asynccap::sim::{run_monte_carlo, CodeLength, DecoderKind, RunSummary, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::{create_output, read_input, with_suffix, write_json, CliResult, Failure, BUILD_ID};

pub const MAX_POINTS: u64 = 10_000;

/// Values to substitute into the base scenario. Missing or empty axes keep
/// the base value.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default, alias = "B")]
    pub b_bits: Vec<u32>,
    #[serde(default)]
    pub n: Vec<CodeLength>,
    #[serde(default)]
    pub scheme: Vec<Scheme>,
    #[serde(default)]
    pub decoder: Vec<DecoderKind>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    #[serde(default)]
    pub axes: Axes,
    /// Output prefix for `<out>.csv` and `<out>.summaries.json`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl SweepSpec {
    pub fn size(&self) -> u64 {
        let a = &self.axes;
        [
            a.beta.len(),
            a.rho.len(),
            a.b_bits.len(),
            a.n.len(),
            a.scheme.len(),
            a.decoder.len(),
        ]
        .iter()
        .fold(1u64, |acc, &l| acc.saturating_mul(l.max(1) as u64))
    }

    /// All grid points, last axis varying fastest.
    pub fn points(&self) -> Vec<ScenarioConfig> {
        let (a, b) = (&self.axes, &self.base);
        let mut out = Vec::new();
        for &beta in &axis(&a.beta, b.beta) {
            for &rho in &axis(&a.rho, b.rho) {
                for &b_bits in &axis(&a.b_bits, b.b_bits) {
                    for &n in &axis(&a.n, b.n) {
                        for &scheme in &axis(&a.scheme, b.scheme) {
                            for &decoder in &axis(&a.decoder, b.decoder) {
                                out.push(ScenarioConfig {
                                    beta,
                                    rho,
                                    b_bits,
                                    n,
                                    scheme,
                                    decoder,
                                    ..b.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    point: usize,
    beta: f64,
    rho: f64,
    b_bits: u32,
    n: u64,
    scheme: Scheme,
    decoder: DecoderKind,
    a: u64,
    n_star: u64,
    c_value: f64,
    trials: u64,
    error_prob: f64,
    error_ci_low: f64,
    error_ci_high: f64,
    ties: u64,
    timeouts: u64,
    rho_hat: f64,
    rho_hat_without_estimation: f64,
    mean_sampling_ratio: f64,
    d_hat: u64,
    delay_p50: f64,
    delay_p90: f64,
    rate_per_unit_cost: f64,
}

fn row(point: usize, s: &RunSummary) -> SweepRow {
    let (c, i, m) = (&s.config, &s.scenario, &s.metrics);
    SweepRow {
        point,
        beta: c.beta,
        rho: c.rho,
        b_bits: c.b_bits,
        n: i.n,
        scheme: c.scheme,
        decoder: c.decoder,
        a: i.a,
        n_star: i.n_star,
        c_value: i.c_value,
        trials: m.trials,
        error_prob: m.error_prob,
        error_ci_low: m.error_ci95.0,
        error_ci_high: m.error_ci95.1,
        ties: m.ties,
        timeouts: m.timeouts,
        rho_hat: m.rho_hat,
        rho_hat_without_estimation: m.rho_hat_without_estimation,
        mean_sampling_ratio: m.mean_sampling_ratio,
        d_hat: m.d_hat,
        delay_p50: m.delay.p50,
        delay_p90: m.delay.p90,
        rate_per_unit_cost: m.rate_per_unit_cost,
    }
}

pub fn cmd_sweep(path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let text = read_input(path)?;
    let spec: SweepSpec =
        serde_json::from_str(&text).map_err(|e| Failure::input(anyhow!("{}: {e}", path.display())))?;
    let size = spec.size();
    if size > MAX_POINTS {
        return Err(Failure::input(anyhow!(
            "sweep has {size} points, more than the limit of {MAX_POINTS}"
        )));
    }
    let points = spec.points();
    for (i, cfg) in points.iter().enumerate() {
        cfg.validate().map_err(|e| {
            let mut f = Failure::from(e);
            f.err = f.err.context(format!("sweep point {i}"));
            f
        })?;
    }

    let mut summaries = Vec::with_capacity(points.len());
    for (i, cfg) in points.into_iter().enumerate() {
        let start = Instant::now();
        let mc = run_monte_carlo(&cfg).map_err(|e| {
            let mut f = Failure::from(e);
            f.err = f.err.context(format!("sweep point {i}"));
            f
        })?;
        summaries.push(RunSummary {
            config: cfg,
            scenario: mc.info,
            metrics: mc.metrics,
            build_id: BUILD_ID.to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        eprintln!("point {}/{size} done", i + 1);
    }

    let prefix = out
        .or(spec.out)
        .unwrap_or_else(|| PathBuf::from(path.file_stem().unwrap_or(path.as_os_str())));
    let csv_path = with_suffix(&prefix, ".csv");
    let json_path = with_suffix(&prefix, ".summaries.json");
    let mut wtr = csv::Writer::from_writer(create_output(&csv_path)?);
    for (i, s) in summaries.iter().enumerate() {
        wtr.serialize(row(i, s)).map_err(Failure::other)?;
    }
    wtr.flush().map_err(Failure::other)?;
    write_json(&json_path, &summaries)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
