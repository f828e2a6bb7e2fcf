//! Discrete memoryless channels with an idle input and per-symbol costs.
//!
//! The idle input `*` always owns the last row of the transition matrix.
//! When `*` is also a transmit symbol, the channel file names which `X`
//! symbol aliases it; that symbol's row must equal the idle row and its cost
//! must be zero.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{Dist, SUM_TOLERANCE};

/// Channel description as read from (and written to) JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub x_alphabet: Vec<String>,
    pub y_alphabet: Vec<String>,
    /// Label of the transmit symbol that doubles as the idle input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star_in_x: Option<String>,
    /// Row-major transition matrix, one row per `X` symbol then the idle row.
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
}

/// First violated channel constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("duplicate symbol label {0:?}")]
    DuplicateSymbol(String),
    #[error("Q has {got} rows, expected {expected} (one per input symbol plus the idle row)")]
    RowCount { expected: usize, got: usize },
    #[error("row {row} has {got} entries, expected {expected}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("row {row} has invalid probability {value}")]
    BadProbability { row: usize, value: f64 },
    #[error("row sum: row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("output {0:?} is unreachable from every input")]
    UnreachableOutput(String),
    #[error("cost vector has {got} entries, expected {expected}")]
    CostLength { expected: usize, got: usize },
    #[error("invalid cost {value} for symbol {symbol:?}")]
    BadCost { symbol: String, value: f64 },
    #[error("zero-cost non-idle symbol {0:?}")]
    ZeroCostNonIdle(String),
    #[error("idle alias {0:?} is not a transmit symbol")]
    UnknownStarAlias(String),
    #[error("idle alias {0:?} must have the idle row as its transition row")]
    StarAliasRow(String),
    #[error("idle alias {0:?} must have zero cost")]
    StarAliasCost(String),
}

impl ChannelSpec {
    /// Binary symmetric channel with the idle input aliased to `0`, costs `(0, 1)`.
    pub fn bsc(flip: f64) -> Self {
        let r0 = vec![1.0 - flip, flip];
        let r1 = vec![flip, 1.0 - flip];
        ChannelSpec {
            x_alphabet: vec!["0".into(), "1".into()],
            y_alphabet: vec!["0".into(), "1".into()],
            star_in_x: Some("0".into()),
            q: vec![r0.clone(), r1, r0],
            cost: vec![0.0, 1.0],
        }
    }

    /// Binary symmetric channel with unit costs and an idle input outside
    /// `X` that behaves like `0`.
    pub fn bsc_unit_cost(flip: f64) -> Self {
        let r0 = vec![1.0 - flip, flip];
        let r1 = vec![flip, 1.0 - flip];
        ChannelSpec {
            x_alphabet: vec!["0".into(), "1".into()],
            y_alphabet: vec!["0".into(), "1".into()],
            star_in_x: None,
            q: vec![r0.clone(), r1, r0],
            cost: vec![1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<(), Violation> {
        let nx = self.x_alphabet.len();
        let ny = self.y_alphabet.len();
        if nx == 0 || ny == 0 {
            return Err(Violation::EmptyAlphabet);
        }
        for labels in [&self.x_alphabet, &self.y_alphabet] {
            let mut seen = HashSet::new();
            for l in labels {
                if !seen.insert(l) {
                    return Err(Violation::DuplicateSymbol(l.clone()));
                }
            }
        }
        if self.q.len() != nx + 1 {
            return Err(Violation::RowCount {
                expected: nx + 1,
                got: self.q.len(),
            });
        }
        for (row, probs) in self.q.iter().enumerate() {
            if probs.len() != ny {
                return Err(Violation::RowLength {
                    row,
                    expected: ny,
                    got: probs.len(),
                });
            }
            if let Some(&value) = probs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Violation::BadProbability { row, value });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Violation::RowSum { row, sum });
            }
        }
        for (y, label) in self.y_alphabet.iter().enumerate() {
            if self.q.iter().all(|r| r[y] == 0.0) {
                return Err(Violation::UnreachableOutput(label.clone()));
            }
        }
        if self.cost.len() != nx {
            return Err(Violation::CostLength {
                expected: nx,
                got: self.cost.len(),
            });
        }
        let alias = match &self.star_in_x {
            Some(label) => Some(
                self.x_alphabet
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Violation::UnknownStarAlias(label.clone()))?,
            ),
            None => None,
        };
        for (x, (&value, label)) in self.cost.iter().zip(&self.x_alphabet).enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Violation::BadCost {
                    symbol: label.clone(),
                    value,
                });
            }
            if value == 0.0 && Some(x) != alias {
                return Err(Violation::ZeroCostNonIdle(label.clone()));
            }
        }
        if let Some(a) = alias {
            let label = &self.x_alphabet[a];
            let same = self.q[a]
                .iter()
                .zip(&self.q[nx])
                .all(|(u, v)| (u - v).abs() <= SUM_TOLERANCE);
            if !same {
                return Err(Violation::StarAliasRow(label.clone()));
            }
            if self.cost[a] != 0.0 {
                return Err(Violation::StarAliasCost(label.clone()));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Dmc, Violation> {
        self.validate()?;
        let nx = self.x_alphabet.len();
        let star_alias = self
            .star_in_x
            .as_ref()
            .and_then(|l| self.x_alphabet.iter().position(|s| s == l));
        let cdf = self
            .q
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Dmc {
            spec: self.clone(),
            star: nx,
            star_alias,
            cdf,
        })
    }
}

/// A validated channel. Input rows are indexed `0..x_len()` for transmit
/// symbols and [`Dmc::star`] for the idle input.
#[derive(Debug, Clone)]
pub struct Dmc {
    spec: ChannelSpec,
    star: usize,
    star_alias: Option<usize>,
    cdf: Vec<Vec<f64>>,
}

impl Dmc {
    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    pub fn x_len(&self) -> usize {
        self.star
    }

    pub fn y_len(&self) -> usize {
        self.spec.y_alphabet.len()
    }

    /// Row index of the idle input.
    pub fn star(&self) -> usize {
        self.star
    }

    /// Transmit symbol aliasing the idle input, if any.
    pub fn star_alias(&self) -> Option<usize> {
        self.star_alias
    }

    pub fn star_in_x(&self) -> bool {
        self.star_alias.is_some()
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.spec.q[input]
    }

    /// Pure-noise output law `Q(.|*)`.
    pub fn q_star(&self) -> &[f64] {
        &self.spec.q[self.star]
    }

    pub fn q_star_dist(&self) -> Dist {
        Dist::normalized(self.q_star()).expect("validated idle row")
    }

    pub fn cost(&self, x: usize) -> f64 {
        self.spec.cost[x]
    }

    pub fn costs(&self) -> &[f64] {
        &self.spec.cost
    }

    /// `E[k(X)]` under `px`.
    pub fn expected_cost(&self, px: &Dist) -> f64 {
        px.probs().iter().zip(&self.spec.cost).map(|(p, k)| p * k).sum()
    }

    /// Inverse-CDF output draw from a uniform in `[0, 1)`.
    pub fn emit_from_uniform(&self, input: usize, u: f64) -> usize {
        let cdf = &self.cdf[input];
        let y = cdf.partition_point(|&c| c <= u);
        // rows that sum to 1 - 1e-12 can leave u past the last bin
        let y = y.min(cdf.len() - 1);
        if self.spec.q[input][y] > 0.0 {
            return y;
        }
        // skip zero-probability bins that share a CDF value
        (0..=y)
            .rev()
            .find(|&k| self.spec.q[input][k] > 0.0)
            .expect("row has positive mass")
    }

    /// Draw one output for input row `input`.
    pub fn emit<R: Rng + ?Sized>(&self, input: usize, rng: &mut R) -> usize {
        assert!(input <= self.star, "input row {input} out of range");
        self.emit_from_uniform(input, rng.gen::<f64>())
    }
}

impl fmt::Display for Dmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "DMC |X|={} |Y|={} idle{}",
            self.x_len(),
            self.y_len(),
            match self.star_alias {
                Some(a) => format!(" = {}", self.spec.x_alphabet[a]),
                None => " outside X".to_string(),
            }
        )
    }
}
