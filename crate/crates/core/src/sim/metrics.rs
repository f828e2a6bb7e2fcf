//! Aggregate estimates over a batch of trials.

use serde::{Deserialize, Serialize};

use super::TrialOutcome;

/// Messages up to which the per-message error breakdown is reported.
pub const PER_MESSAGE_LIMIT: usize = 64;

const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n` at 95%.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `k`-th smallest value with `k = ceil((1 - eps) N)`.
fn upper_order_stat<T: Copy + PartialOrd>(values: &mut [T], epsilon: f64) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let k = ((1.0 - epsilon) * n - 1e-9).ceil().clamp(1.0, n) as usize;
    Some(values[k - 1])
}

/// Smallest `r` with empirical `P(tau / S_tau <= r) >= 1 - eps`.
pub fn rho_hat(ratios: &[f64], epsilon: f64) -> f64 {
    upper_order_stat(&mut ratios.to_vec(), epsilon).unwrap_or(0.0)
}

/// Smallest `l` with empirical `P(S_tau - nu <= l - 1) >= 1 - eps`.
pub fn d_hat(delays: &[u64], epsilon: f64) -> u64 {
    upper_order_stat(&mut delays.to_vec(), epsilon).map_or(1, |d| d + 1)
}

/// Nearest-rank quantile, `q` in `[0, 1]`.
pub fn quantile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[k.min(sorted.len()) - 1] as f64
}

/// Median with the usual midpoint convention for even counts.
pub fn median(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2] as f64,
        _ => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageErrors {
    pub message: usize,
    pub trials: u64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayQuantiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub trials: u64,
    pub errors: u64,
    /// Message-averaged error probability.
    pub error_prob: f64,
    pub error_ci95: (f64, f64),
    /// Largest per-message error rate (only when `M <= 64`).
    pub max_message_error: Option<f64>,
    pub per_message: Option<Vec<MessageErrors>>,
    pub ties: u64,
    pub timeouts: u64,
    pub horizon_edges: u64,
    pub epsilon: f64,
    pub rho_hat: f64,
    /// `rho_hat` with samples taken only for noise estimation left out.
    pub rho_hat_without_estimation: f64,
    pub mean_sampling_ratio: f64,
    pub d_hat: u64,
    pub delay: DelayQuantiles,
    /// `B / K(C)` in bits per unit cost.
    pub rate_per_unit_cost: f64,
}

impl Metrics {
    pub fn from_outcomes(outcomes: &[TrialOutcome], messages: usize, epsilon: f64, rate: f64) -> Self {
        let trials = outcomes.len() as u64;
        let errors = outcomes.iter().filter(|o| o.error).count() as u64;
        let per_message = (messages <= PER_MESSAGE_LIMIT).then(|| {
            let mut rows: Vec<MessageErrors> = (0..messages)
                .map(|message| MessageErrors {
                    message,
                    trials: 0,
                    errors: 0,
                })
                .collect();
            for o in outcomes {
                rows[o.true_m].trials += 1;
                rows[o.true_m].errors += o.error as u64;
            }
            rows
        });
        let max_message_error = per_message.as_ref().map(|rows| {
            rows.iter()
                .filter(|r| r.trials > 0)
                .map(|r| r.errors as f64 / r.trials as f64)
                .fold(0.0, f64::max)
        });
        let ratios: Vec<f64> = outcomes.iter().map(|o| o.sampling_ratio).collect();
        let ratios_wo: Vec<f64> = outcomes
            .iter()
            .map(|o| (o.tau - o.est_samples) as f64 / o.s_tau as f64)
            .collect();
        let mut delays: Vec<u64> = outcomes.iter().map(|o| o.delay).collect();
        let d = d_hat(&delays, epsilon);
        delays.sort_unstable();
        Metrics {
            trials,
            errors,
            error_prob: if trials > 0 {
                errors as f64 / trials as f64
            } else {
                0.0
            },
            error_ci95: wilson_interval(errors, trials),
            max_message_error,
            per_message,
            ties: outcomes.iter().filter(|o| o.tie).count() as u64,
            timeouts: outcomes.iter().filter(|o| o.timeout).count() as u64,
            horizon_edges: outcomes.iter().filter(|o| o.horizon_edge).count() as u64,
            epsilon,
            rho_hat: rho_hat(&ratios, epsilon),
            rho_hat_without_estimation: rho_hat(&ratios_wo, epsilon),
            mean_sampling_ratio: if ratios.is_empty() {
                0.0
            } else {
                ratios.iter().sum::<f64>() / ratios.len() as f64
            },
            d_hat: d,
            delay: DelayQuantiles {
                p10: quantile(&delays, 0.1),
                p50: median(&delays),
                p90: quantile(&delays, 0.9),
                max: delays.last().map_or(f64::NAN, |&d| d as f64),
            },
            rate_per_unit_cost: rate,
        }
    }
}
