//! CSV rows and JSON summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Metrics, ScenarioConfig, TrialOutcome};
use crate::capacity::BindingTerm;

/// Column order of the per-trial CSV.
pub const CSV_COLUMNS: [&str; 15] = [
    "trial",
    "true_m",
    "decoded_m",
    "nu",
    "sigma",
    "s_tau",
    "tau",
    "delay",
    "sampling_ratio",
    "error",
    "tie",
    "horizon_edge",
    "timeout",
    "est_samples",
    "switches",
];

/// Quantities derived while preparing a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub a: u64,
    pub n: u64,
    pub n_star: u64,
    pub payload_len: u64,
    pub preamble_len: u64,
    pub horizon: u64,
    pub estimation_len: u64,
    pub c_value: f64,
    pub binding_term: BindingTerm,
    pub p_star: Vec<f64>,
    /// Codebook composition.
    pub p_delay: Vec<f64>,
    pub codebook_cost: f64,
}

/// JSON summary of one run: enough to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub scenario: ScenarioInfo,
    pub metrics: Metrics,
    pub build_id: String,
    pub wall_time_s: f64,
}

pub fn write_outcomes_csv<W: Write>(w: W, outcomes: &[TrialOutcome]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if outcomes.is_empty() {
        wtr.write_record(CSV_COLUMNS)?;
    }
    for o in outcomes {
        wtr.serialize(o)?;
    }
    wtr.flush()?;
    Ok(())
}
