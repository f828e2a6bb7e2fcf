//! Full-sampling asynchronous capacity per unit cost.
//!
//! The capacity is the maximum over input laws `P` of
//!
//! ```text
//! min { I(P,Q) / E[k],  (I(P,Q) + D(P_Y || Q*)) / (E[k] (1 + beta)) }
//! ```
//!
//! Both ratios are quasi-concave, so the maximum is found by bisection on a
//! candidate rate `R`: `R` is feasible iff some `P` makes
//! `min(I - R E[k], L - R (1 + beta) E[k])` positive, where
//! `L(P) = sum_x P(x) D(Q(.|x) || Q*) = I + D(P_Y || Q*)`. That inner problem
//! is concave and is attacked with projected supergradient ascent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::prob::{kl_of, Dist, ProbError};

/// Distributions with a smaller expected cost are excluded from the search.
pub const MIN_EXPECTED_COST: f64 = 1e-9;

const MAX_BISECTION_STEPS: usize = 200;
const ASCENT_ITERS: usize = 2500;
// caps the information gradient where P_Y vanishes
const GRADIENT_CAP: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("input law has zero expected cost")]
    ZeroCost,
    #[error("beta must be finite and nonnegative, got {0}")]
    BadBeta(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("bisection did not converge; capacity lies in [{lower}, {upper}]")]
    NonConvergence { lower: f64, upper: f64 },
    #[error("capacity is zero, no finite codeword length achieves it")]
    ZeroCapacity,
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Which of the two ratios attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingTerm {
    /// `I / E[k]`
    Information,
    /// `(I + D) / (E[k] (1 + beta))`
    Divergence,
}

/// Both ratios of the objective at one input law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub information: f64,
    pub divergence_sum: f64,
    pub expected_cost: f64,
    pub information_ratio: f64,
    pub divergence_ratio: f64,
}

impl ObjectiveTerms {
    pub fn value(&self) -> f64 {
        self.information_ratio.min(self.divergence_ratio)
    }

    pub fn binding(&self) -> BindingTerm {
        if self.information_ratio <= self.divergence_ratio {
            BindingTerm::Information
        } else {
            BindingTerm::Divergence
        }
    }
}

/// Per-channel quantities reused by every objective evaluation.
struct Prepared<'a> {
    dmc: &'a Dmc,
    beta: f64,
    // D(Q(.|x) || Q*) per transmit symbol
    star_div: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(dmc: &'a Dmc, beta: f64) -> Result<Self, CapacityError> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(CapacityError::BadBeta(beta));
        }
        let star_div = (0..dmc.x_len())
            .map(|x| kl_of(dmc.row(x), dmc.q_star()))
            .collect();
        Ok(Prepared { dmc, beta, star_div })
    }

    fn output(&self, p: &[f64]) -> Vec<f64> {
        let mut py = vec![0.0; self.dmc.y_len()];
        for (x, &w) in p.iter().enumerate() {
            if w > 0.0 {
                for (o, &q) in py.iter_mut().zip(self.dmc.row(x)) {
                    *o += w * q;
                }
            }
        }
        py
    }

    fn information(&self, p: &[f64], py: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| w * kl_of(self.dmc.row(x), py))
            .sum::<f64>()
            .max(0.0)
    }

    fn linear_sum(&self, p: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&w, &d) in p.iter().zip(&self.star_div) {
            if w > 0.0 {
                if d.is_infinite() {
                    return f64::INFINITY;
                }
                acc += w * d;
            }
        }
        acc
    }

    fn cost(&self, p: &[f64]) -> f64 {
        p.iter().zip(self.dmc.costs()).map(|(a, b)| a * b).sum()
    }

    fn terms(&self, p: &[f64]) -> ObjectiveTerms {
        let py = self.output(p);
        let information = self.information(p, &py);
        let divergence_sum = self.linear_sum(p);
        let expected_cost = self.cost(p);
        ObjectiveTerms {
            information,
            divergence_sum,
            expected_cost,
            information_ratio: information / expected_cost,
            divergence_ratio: divergence_sum / (expected_cost * (1.0 + self.beta)),
        }
    }

    /// Ratio objective, or `None` below the cost floor.
    fn ratio(&self, p: &[f64]) -> Option<f64> {
        let t = self.terms(p);
        (t.expected_cost >= MIN_EXPECTED_COST).then(|| t.value())
    }

    /// Value and a supergradient of `min(I - R k, L - R (1+beta) k)`.
    fn feasibility(&self, p: &[f64], rate: f64) -> (f64, Vec<f64>) {
        let py = self.output(p);
        let info = self.information(p, &py);
        let lin = self.linear_sum(p);
        let ek = self.cost(p);
        let g1 = info - rate * ek;
        let g2 = lin - rate * (1.0 + self.beta) * ek;
        let costs = self.dmc.costs();
        if g1 <= g2 {
            let grad = (0..p.len())
                .map(|x| {
                    let d = kl_of(self.dmc.row(x), &py).min(GRADIENT_CAP);
                    d - rate * costs[x]
                })
                .collect();
            (g1, grad)
        } else {
            let grad = (0..p.len())
                .map(|x| self.star_div[x].min(GRADIENT_CAP) - rate * (1.0 + self.beta) * costs[x])
                .collect();
            (g2, grad)
        }
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Evaluated input law.
#[derive(Debug, Clone)]
struct Candidate {
    p: Vec<f64>,
    ratio: f64,
    cost: f64,
}

struct Search<'a> {
    prep: Prepared<'a>,
    best: Candidate,
    visited: Vec<Candidate>,
}

impl<'a> Search<'a> {
    fn consider(&mut self, p: &[f64]) {
        if let Some(ratio) = self.prep.ratio(p) {
            let cand = Candidate {
                p: p.to_vec(),
                ratio,
                cost: self.prep.cost(p),
            };
            if ratio > self.best.ratio {
                self.best = cand.clone();
            }
            // only keep points that could matter for the optimizer set
            if ratio >= self.best.ratio * 0.9 {
                self.visited.push(cand);
            }
        }
    }

    /// Supergradient ascent on the rate-`rate` feasibility function from
    /// `start`. Returns true once a law with ratio above `rate` is seen.
    fn ascend(&mut self, start: &[f64], rate: f64) -> bool {
        let mut p = start.to_vec();
        let mut step0 = 0.5;
        for t in 0..ASCENT_ITERS {
            let (val, grad) = self.prep.feasibility(&p, rate);
            if val > 0.0 && self.prep.cost(&p) >= MIN_EXPECTED_COST {
                self.consider(&p);
                if self.best.ratio > rate {
                    return true;
                }
            }
            let mean = grad.iter().sum::<f64>() / grad.len() as f64;
            let centered: Vec<f64> = grad.iter().map(|g| g - mean).collect();
            let norm = centered.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < 1e-15 {
                break;
            }
            if t == ASCENT_ITERS / 2 {
                // restart the step schedule from the best point so far
                p = self.best.p.clone();
                step0 *= 0.1;
            }
            let eta = step0 / ((t % (ASCENT_ITERS / 2)) as f64 + 1.0).sqrt();
            for (pi, gi) in p.iter_mut().zip(&centered) {
                *pi += eta * gi / norm;
            }
            project_simplex(&mut p);
        }
        self.consider(&p);
        self.best.ratio > rate
    }
}

/// Result of the capacity computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Bits per unit cost.
    pub c_value: f64,
    pub p_star: Dist,
    pub binding_term: BindingTerm,
    pub beta: f64,
    pub tolerance: f64,
    /// Bisection bracket at termination.
    pub lower: f64,
    pub upper: f64,
    /// `E[k]` at `p_star`.
    pub expected_cost: f64,
    /// Smallest and largest `E[k]` over the near-optimal laws found.
    pub cost_band: (f64, f64),
    /// Near-optimal law with the largest `E[k]`; it attains `n*_B`.
    pub p_delay: Dist,
}

impl CapacityResult {
    /// Minimal-delay codeword length `ceil(B / (C max E[k]))`.
    pub fn n_star(&self, b_bits: u32) -> Result<u64, CapacityError> {
        n_star_from(self.c_value, self.cost_band.1, b_bits)
    }

    /// Codeword lengths obtained from both ends of the cost band.
    pub fn n_star_band(&self, b_bits: u32) -> Result<(u64, u64), CapacityError> {
        Ok((
            n_star_from(self.c_value, self.cost_band.1, b_bits)?,
            n_star_from(self.c_value, self.cost_band.0, b_bits)?,
        ))
    }
}

/// `ceil(B / (c E[k]))`.
pub fn n_star_from(c_value: f64, expected_cost: f64, b_bits: u32) -> Result<u64, CapacityError> {
    let denom = c_value * expected_cost;
    if !(denom > 0.0) {
        return Err(CapacityError::ZeroCapacity);
    }
    let raw = b_bits as f64 / denom;
    // absorb rounding so that exact ratios are not bumped up by one
    Ok((raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as u64)
}

/// Both ratios at `px`.
pub fn objective_terms(px: &Dist, dmc: &Dmc, beta: f64) -> Result<ObjectiveTerms, CapacityError> {
    if px.len() != dmc.x_len() {
        return Err(ProbError::AlphabetMismatch {
            left: px.len(),
            right: dmc.x_len(),
        }
        .into());
    }
    let prep = Prepared::new(dmc, beta)?;
    let t = prep.terms(px.probs());
    if t.expected_cost <= 0.0 {
        return Err(CapacityError::ZeroCost);
    }
    Ok(t)
}

/// `min{ I/E[k], (I + D(P_Y||Q*)) / (E[k](1+beta)) }` at `px`.
pub fn rate_objective(px: &Dist, dmc: &Dmc, beta: f64) -> Result<f64, CapacityError> {
    objective_terms(px, dmc, beta).map(|t| t.value())
}

fn upper_bound(prep: &Prepared<'_>) -> f64 {
    let dmc = prep.dmc;
    let kmin = dmc
        .costs()
        .iter()
        .copied()
        .filter(|&k| k > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !kmin.is_finite() {
        return 0.0;
    }
    let info_cap = (dmc.x_len().min(dmc.y_len()) as f64).log2();
    if dmc.star_alias().is_none() {
        return info_cap / kmin;
    }
    // with a free idle symbol, I <= L, so the ratio is at most max D_x / k_x
    let lin = (0..dmc.x_len())
        .filter(|&x| dmc.cost(x) > 0.0)
        .map(|x| prep.star_div[x] / dmc.cost(x))
        .fold(0.0, f64::max);
    if lin.is_finite() {
        lin
    } else {
        info_cap / MIN_EXPECTED_COST
    }
}

/// Capacity per unit cost under full sampling, to within `tol`.
pub fn capacity_full_sampling(dmc: &Dmc, beta: f64, tol: f64) -> Result<CapacityResult, CapacityError> {
    if !(tol > 0.0) {
        return Err(CapacityError::BadTolerance(tol));
    }
    let prep = Prepared::new(dmc, beta)?;
    let nx = dmc.x_len();
    let mut hi = upper_bound(&prep) * (1.0 + 1e-9) + 1e-12;

    // starting points: uniform over costly symbols plus every costly vertex
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let costly: Vec<usize> = (0..nx).filter(|&x| dmc.cost(x) > 0.0).collect();
    let mut uniform = vec![0.0; nx];
    for &x in &costly {
        uniform[x] = 1.0 / costly.len() as f64;
    }
    starts.push(vec![1.0 / nx as f64; nx]);
    starts.push(uniform.clone());
    for &x in &costly {
        let mut v = vec![0.0; nx];
        v[x] = 1.0;
        starts.push(v);
    }

    let init_ratio = prep.ratio(&uniform).unwrap_or(0.0);
    let mut search = Search {
        prep,
        best: Candidate {
            p: uniform.clone(),
            ratio: init_ratio,
            cost: 0.0,
        },
        visited: Vec::new(),
    };
    for s in &starts {
        search.consider(s);
    }

    let mut lo = search.best.ratio.max(0.0);
    let mut steps = 0;
    while hi - lo > tol {
        steps += 1;
        if steps > MAX_BISECTION_STEPS {
            return Err(CapacityError::NonConvergence { lower: lo, upper: hi });
        }
        let mid = 0.5 * (lo + hi);
        let mut found = search.ascend(&search.best.p.clone(), mid);
        if !found {
            for s in &starts {
                if search.ascend(s, mid) {
                    found = true;
                    break;
                }
            }
        }
        if found {
            lo = search.best.ratio;
            hi = hi.max(lo);
        } else {
            hi = mid;
        }
    }

    let best = search.best.clone();
    let c_value = best.ratio.max(0.0);
    let p_star = Dist::normalized(&best.p)?;
    let terms = search.prep.terms(p_star.probs());

    let mut near: Vec<Candidate> = search
        .visited
        .iter()
        .filter(|c| c.ratio >= c_value - tol)
        .cloned()
        .collect();
    near.extend(grid_candidates(&search.prep, c_value, tol));
    near.extend(ray_candidates(&search.prep, &best.p, c_value, tol));
    let mut band = (terms.expected_cost, terms.expected_cost);
    let mut p_delay = p_star.clone();
    for c in &near {
        band.0 = band.0.min(c.cost);
        if c.cost > band.1 {
            band.1 = c.cost;
            p_delay = Dist::normalized(&c.p)?;
        }
    }

    Ok(CapacityResult {
        c_value,
        p_star,
        binding_term: terms.binding(),
        beta,
        tolerance: tol,
        lower: lo,
        upper: hi,
        expected_cost: terms.expected_cost,
        cost_band: band,
        p_delay,
    })
}

/// Near-optimal grid points for small input alphabets.
fn grid_candidates(prep: &Prepared<'_>, c_value: f64, tol: f64) -> Vec<Candidate> {
    let nx = prep.dmc.x_len();
    let steps = match nx {
        1 => 1,
        2 => 2000,
        3 => 200,
        4 => 40,
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut counts = vec![0usize; nx];
    grid_walk(&mut counts, 0, steps, &mut |c| {
        let p: Vec<f64> = c.iter().map(|&k| k as f64 / steps as f64).collect();
        if let Some(ratio) = prep.ratio(&p) {
            if ratio >= c_value - tol {
                out.push(Candidate {
                    cost: prep.cost(&p),
                    p,
                    ratio,
                });
            }
        }
    });
    out
}

fn grid_walk(counts: &mut [usize], idx: usize, remaining: usize, f: &mut dyn FnMut(&[usize])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        grid_walk(counts, idx + 1, remaining - k, f);
    }
}

/// Laws on the segment from the free idle vertex through `p_star` and past
/// it; with a zero-cost idle symbol the optimizer set is often such a ray.
fn ray_candidates(prep: &Prepared<'_>, p_star: &[f64], c_value: f64, tol: f64) -> Vec<Candidate> {
    let Some(alias) = prep.dmc.star_alias() else {
        return Vec::new();
    };
    let idle_mass = p_star[alias];
    if idle_mass >= 1.0 {
        return Vec::new();
    }
    // p(t) = e_idle + t (p_star - e_idle), t in (0, 1 / (1 - idle_mass)]
    let t_max = 1.0 / (1.0 - idle_mass);
    let mut out = Vec::new();
    for i in 1..=400 {
        let t = t_max * i as f64 / 400.0;
        let p: Vec<f64> = p_star
            .iter()
            .enumerate()
            .map(|(x, &v)| {
                let e = if x == alias { 1.0 } else { 0.0 };
                (e + t * (v - e)).max(0.0)
            })
            .collect();
        if let Some(ratio) = prep.ratio(&p) {
            if ratio >= c_value - tol {
                out.push(Candidate {
                    cost: prep.cost(&p),
                    p,
                    ratio,
                });
            }
        }
    }
    out
}

/// Minimal-delay codeword length `n*_B` for `B` bits.
pub fn min_delay_length(dmc: &Dmc, beta: f64, b_bits: u32, tol: f64) -> Result<u64, CapacityError> {
    let cap = capacity_full_sampling(dmc, beta, tol)?;
    if cap.c_value <= 0.0 {
        return Err(CapacityError::ZeroCapacity);
    }
    cap.n_star(b_bits)
}
