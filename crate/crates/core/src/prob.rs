//! Finite-alphabet probability and method-of-types primitives.
//!
//! Symbols are plain `usize` indices into an alphabet; every logarithm is
//! base 2, so entropies and divergences come out in bits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;

/// Tolerance on the total mass of a [`Dist`].
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("distribution is empty")]
    Empty,
    #[error("probability {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
    #[error("alphabet size mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("symbol {symbol} is outside an alphabet of size {size}")]
    UnknownSymbol { symbol: usize, size: usize },
    #[error("cannot take the type of an empty sequence")]
    EmptySequence,
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Dist(Vec<f64>);

impl Dist {
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.is_empty() {
            return Err(ProbError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProbError::OutOfRange { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProbError::BadSum(sum));
        }
        Ok(Dist(probs))
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(weights: &[f64]) -> Result<Self, ProbError> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() {
            return Err(ProbError::Empty);
        }
        if !(sum > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(ProbError::BadSum(sum));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        // push the rounding residue onto the largest entry
        let resid = 1.0 - probs.iter().sum::<f64>();
        let imax = argmax(&probs);
        probs[imax] = (probs[imax] + resid).clamp(0.0, 1.0);
        Dist::new(probs)
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform distribution over an empty alphabet");
        Dist(vec![1.0 / size as f64; size])
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        assert!(at < size, "point mass outside the alphabet");
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Dist(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_same(&self, other: &Dist) -> Result<(), ProbError> {
        if self.len() != other.len() {
            return Err(ProbError::AlphabetMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Dist {
    type Error = ProbError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Dist::new(value)
    }
}

impl From<Dist> for Vec<f64> {
    fn from(value: Dist) -> Self {
        value.0
    }
}

/// Occurrence counts of each symbol in a nonempty sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmpiricalType {
    counts: Vec<u64>,
    len: u64,
}

impl EmpiricalType {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self, ProbError> {
        if counts.is_empty() {
            return Err(ProbError::Empty);
        }
        let len = counts.iter().sum();
        if len == 0 {
            return Err(ProbError::EmptySequence);
        }
        Ok(EmpiricalType { counts, len })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sequence length `n`.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn to_dist(&self) -> Dist {
        let n = self.len as f64;
        Dist(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Pair counts of two equal-length sequences, row-major over `X x Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointType {
    counts: Vec<u64>,
    rows: usize,
    cols: usize,
    len: u64,
}

impl JointType {
    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.cols + y]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn x_marginal(&self) -> EmpiricalType {
        let counts = (0..self.rows)
            .map(|x| (0..self.cols).map(|y| self.count(x, y)).sum())
            .collect();
        EmpiricalType {
            counts,
            len: self.len,
        }
    }

    pub fn y_marginal(&self) -> EmpiricalType {
        let counts = (0..self.cols)
            .map(|y| (0..self.rows).map(|x| self.count(x, y)).sum())
            .collect();
        EmpiricalType {
            counts,
            len: self.len,
        }
    }

    /// Normalized joint type, row-major.
    pub fn to_probs(&self) -> Vec<f64> {
        let n = self.len as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Dist) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>()
}

/// Relative entropy `D(p || q)` in bits; `+inf` when `p` is not absolutely
/// continuous with respect to `q`.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64, ProbError> {
    p.check_same(q)?;
    Ok(kl_of(p.probs(), q.probs()))
}

pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).log2();
        }
    }
    // rounding can push a true zero slightly negative
    acc.max(0.0)
}

/// L1 distance between two vectors over the same index set.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// Output law `P_Y(y) = sum_x pX(x) Q(y|x)` for an input law over the
/// transmit alphabet.
pub fn output_marginal(px: &Dist, dmc: &Dmc) -> Result<Dist, ProbError> {
    if px.len() != dmc.x_len() {
        return Err(ProbError::AlphabetMismatch {
            left: px.len(),
            right: dmc.x_len(),
        });
    }
    let mut out = vec![0.0; dmc.y_len()];
    for (x, &w) in px.probs().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &q) in out.iter_mut().zip(dmc.row(x)) {
            *o += w * q;
        }
    }
    for o in out.iter_mut() {
        *o = o.clamp(0.0, 1.0);
    }
    Dist::normalized(&out)
}

/// `I(X;Y)` in bits for `X ~ pX` sent over `dmc`.
pub fn mutual_information(px: &Dist, dmc: &Dmc) -> Result<f64, ProbError> {
    let py = output_marginal(px, dmc)?;
    Ok(px
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| w * kl_of(dmc.row(x), py.probs()))
        .sum())
}

pub fn empirical_type(seq: &[usize], alphabet_size: usize) -> Result<EmpiricalType, ProbError> {
    if seq.is_empty() {
        return Err(ProbError::EmptySequence);
    }
    let mut counts = vec![0u64; alphabet_size];
    for &s in seq {
        *counts.get_mut(s).ok_or(ProbError::UnknownSymbol {
            symbol: s,
            size: alphabet_size,
        })? += 1;
    }
    Ok(EmpiricalType {
        counts,
        len: seq.len() as u64,
    })
}

pub fn joint_type(xs: &[usize], ys: &[usize], x_size: usize, y_size: usize) -> Result<JointType, ProbError> {
    if xs.len() != ys.len() {
        return Err(ProbError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(ProbError::EmptySequence);
    }
    let mut counts = vec![0u64; x_size * y_size];
    for (&x, &y) in xs.iter().zip(ys) {
        if x >= x_size {
            return Err(ProbError::UnknownSymbol {
                symbol: x,
                size: x_size,
            });
        }
        if y >= y_size {
            return Err(ProbError::UnknownSymbol {
                symbol: y,
                size: y_size,
            });
        }
        counts[x * y_size + y] += 1;
    }
    Ok(JointType {
        counts,
        rows: x_size,
        cols: y_size,
        len: xs.len() as u64,
    })
}

/// Cumulative table of `log2(k!)`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(max_n: usize) -> Self {
        let mut table = Vec::with_capacity(max_n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=max_n {
            acc += (k as f64).log2();
            table.push(acc);
        }
        LogFactorials { table }
    }

    pub fn max_n(&self) -> usize {
        self.table.len() - 1
    }

    /// `log2(k!)`, extending past the table on demand.
    pub fn get(&self, k: usize) -> f64 {
        match self.table.get(k) {
            Some(v) => *v,
            None => {
                let mut acc = *self.table.last().unwrap();
                for i in self.table.len()..=k {
                    acc += (i as f64).log2();
                }
                acc
            }
        }
    }

    /// `log2 P(X^n in T_t)` for `X^n` i.i.d. `q`, from raw counts.
    pub fn log_type_class_prob_counts(&self, counts: &[u64], q: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let mut acc = self.get(n as usize);
        for (&c, &qy) in counts.iter().zip(q) {
            if c == 0 {
                continue;
            }
            if qy <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += c as f64 * qy.log2() - self.get(c as usize);
        }
        acc
    }
}

/// Exact `log2` probability that an i.i.d. `q` string of length `t.len()`
/// has type `t`: `log2 n! - sum log2 c_y! + sum c_y log2 q(y)`.
pub fn log_type_class_prob(t: &EmpiricalType, q: &Dist) -> Result<f64, ProbError> {
    if t.alphabet_size() != q.len() {
        return Err(ProbError::AlphabetMismatch {
            left: t.alphabet_size(),
            right: q.len(),
        });
    }
    let table = LogFactorials::new(t.len() as usize);
    Ok(table.log_type_class_prob_counts(t.counts(), q.probs()))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
