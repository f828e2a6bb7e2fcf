//! Constant-composition codebooks and the two decoders.
//!
//! A codeword is an optional preamble (repetitions of one symbol) followed by
//! a payload whose type lies within `1/log2 n'` of the target composition in
//! L1, `n'` being the payload length. Decoders only ever look at payloads.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::prob::{kl_of, Dist};

/// Draws allowed per codeword before giving up on a composition target.
pub const REJECTION_BUDGET: u64 = 1_000_000;
pub const MAX_B_BITS: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("codeword length {0} is too short (need n >= 4)")]
    TooShort(u64),
    #[error("B = {0} bits exceeds the supported maximum of {MAX_B_BITS}")]
    TooManyMessages(u32),
    #[error("composition has {got} entries but the channel has {expected} inputs")]
    CompositionSize { expected: usize, got: usize },
    #[error("no input symbol is distinguishable from the idle symbol, cannot build a preamble")]
    NoPreambleSymbol,
    #[error(
        "composition target unreachable at payload length {payload_len}: \
         {accepted} codewords accepted after {draws} draws (increase n)"
    )]
    RejectionBudget {
        payload_len: usize,
        draws: u64,
        accepted: u64,
    },
    #[error("window has length {got}, payload length is {expected}")]
    WindowLength { expected: usize, got: usize },
    #[error("symbol {symbol} outside alphabet of size {size}")]
    UnknownSymbol { symbol: usize, size: usize },
    #[error("inconsistent codebook: {0}")]
    Inconsistent(String),
    #[error("codebook JSON: {0}")]
    Json(String),
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: u64) -> u32 {
    assert!(n >= 1);
    64 - (n - 1).leading_zeros()
}

/// L1 tolerance of the constant-composition set at payload length `n`.
pub fn composition_margin(payload_len: usize) -> f64 {
    1.0 / (payload_len as f64).log2()
}

/// Typicality margin `2 / log2 n'`.
pub fn typicality_margin(payload_len: usize) -> f64 {
    2.0 / (payload_len as f64).log2()
}

fn within_composition(counts: &[u64], p: &[f64], margin: f64) -> bool {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let dist: f64 = counts
        .iter()
        .zip(p)
        .map(|(&c, &q)| (c as f64 / nf - q).abs())
        .sum();
    dist <= margin + 1e-12
}

/// `M = 2^B` codewords of length `n` over the channel inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub b_bits: u32,
    /// Full codeword length (preamble included).
    pub n: usize,
    pub preamble_len: usize,
    pub preamble_symbol: Option<usize>,
    pub composition: Dist,
    /// `max_m sum_i k(c_i(m))`.
    pub total_cost: f64,
    pub codewords: Vec<Vec<usize>>,
}

impl Codebook {
    pub fn messages(&self) -> usize {
        self.codewords.len()
    }

    pub fn payload_len(&self) -> usize {
        self.n - self.preamble_len
    }

    pub fn codeword(&self, m: usize) -> &[usize] {
        &self.codewords[m]
    }

    pub fn payload(&self, m: usize) -> &[usize] {
        &self.codewords[m][self.preamble_len..]
    }

    /// Rate per unit cost `B / K(C)`.
    pub fn rate_per_unit_cost(&self) -> f64 {
        self.b_bits as f64 / self.total_cost
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("codebook serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CodecError> {
        serde_json::from_str(s).map_err(|e| CodecError::Json(e.to_string()))
    }

    /// Re-checks composition, preamble and cost against `dmc`.
    pub fn verify(&self, dmc: &Dmc) -> Result<(), CodecError> {
        let bad = |msg: String| Err(CodecError::Inconsistent(msg));
        if self.codewords.len() != 1usize << self.b_bits {
            return bad(format!(
                "{} codewords for B = {}",
                self.codewords.len(),
                self.b_bits
            ));
        }
        if self.composition.len() != dmc.x_len() {
            return bad("composition size".into());
        }
        if self.preamble_len >= self.n {
            return bad("preamble fills the codeword".into());
        }
        let margin = composition_margin(self.payload_len());
        let mut max_cost: f64 = 0.0;
        for (m, cw) in self.codewords.iter().enumerate() {
            if cw.len() != self.n {
                return bad(format!("codeword {m} has length {}", cw.len()));
            }
            if let Some(&s) = cw.iter().find(|&&s| s >= dmc.x_len()) {
                return Err(CodecError::UnknownSymbol {
                    symbol: s,
                    size: dmc.x_len(),
                });
            }
            if self.preamble_len > 0
                && cw[..self.preamble_len]
                    .iter()
                    .any(|&s| Some(s) != self.preamble_symbol)
            {
                return bad(format!("codeword {m} preamble"));
            }
            let mut counts = vec![0u64; dmc.x_len()];
            for &s in self.payload(m) {
                counts[s] += 1;
            }
            if !within_composition(&counts, self.composition.probs(), margin) {
                return bad(format!("codeword {m} composition"));
            }
            max_cost = max_cost.max(cw.iter().map(|&s| dmc.cost(s)).sum());
        }
        if (max_cost - self.total_cost).abs() > 1e-9 * max_cost.max(1.0) {
            return bad(format!("total cost {} != {}", self.total_cost, max_cost));
        }
        Ok(())
    }
}

/// Transmit symbol maximizing `D(Q(.|x) || Q*)`; `None` if every row equals
/// the idle row.
pub fn preamble_symbol(dmc: &Dmc) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for x in 0..dmc.x_len() {
        let d = kl_of(dmc.row(x), dmc.q_star());
        if d > 0.0 && best.is_none_or(|(_, b)| d > b) {
            best = Some((x, d));
        }
    }
    best.map(|(x, _)| x)
}

/// Rejection-samples `2^B` codewords whose payload types sit in the
/// constant-composition set around `p`.
pub fn generate_codebook<R: Rng + ?Sized>(
    dmc: &Dmc,
    p: &Dist,
    n: usize,
    b_bits: u32,
    preamble: bool,
    rng: &mut R,
) -> Result<Codebook, CodecError> {
    if n < 4 {
        return Err(CodecError::TooShort(n as u64));
    }
    if b_bits > MAX_B_BITS {
        return Err(CodecError::TooManyMessages(b_bits));
    }
    if p.len() != dmc.x_len() {
        return Err(CodecError::CompositionSize {
            expected: dmc.x_len(),
            got: p.len(),
        });
    }
    let (preamble_len, preamble_symbol) = if preamble {
        let sym = preamble_symbol(dmc).ok_or(CodecError::NoPreambleSymbol)?;
        (ceil_log2(n as u64) as usize, Some(sym))
    } else {
        (0, None)
    };
    let payload_len = n - preamble_len;
    let margin = composition_margin(payload_len);

    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &v in p.probs() {
        acc += v;
        cdf.push(acc);
    }
    let draw = |u: f64| -> usize {
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        if p.probs()[i] > 0.0 {
            i
        } else {
            (0..=i).rev().find(|&k| p.probs()[k] > 0.0).unwrap()
        }
    };

    let m_count = 1usize << b_bits;
    let mut codewords = Vec::with_capacity(m_count);
    let mut counts = vec![0u64; dmc.x_len()];
    let mut total_cost: f64 = 0.0;
    let mut total_draws = 0u64;
    for accepted in 0..m_count {
        let mut draws = 0u64;
        let payload = loop {
            if draws >= REJECTION_BUDGET {
                return Err(CodecError::RejectionBudget {
                    payload_len,
                    draws: total_draws,
                    accepted: accepted as u64,
                });
            }
            draws += 1;
            total_draws += 1;
            counts.iter_mut().for_each(|c| *c = 0);
            let cand: Vec<usize> = (0..payload_len).map(|_| draw(rng.gen::<f64>())).collect();
            for &s in &cand {
                counts[s] += 1;
            }
            if within_composition(&counts, p.probs(), margin) {
                break cand;
            }
        };
        let mut cw = Vec::with_capacity(n);
        if let Some(sym) = preamble_symbol {
            cw.extend(std::iter::repeat_n(sym, preamble_len));
        }
        cw.extend(payload);
        total_cost = total_cost.max(cw.iter().map(|&s| dmc.cost(s)).sum());
        codewords.push(cw);
    }
    Ok(Codebook {
        b_bits,
        n,
        preamble_len,
        preamble_symbol,
        composition: p.clone(),
        total_cost,
        codewords,
    })
}

/// Outcome of one decoding attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Unique(usize),
    /// Several candidates passed; `chosen` was picked uniformly among them.
    Tie {
        chosen: usize,
        candidates: usize,
    },
    None,
}

impl Decision {
    pub fn message(&self) -> Option<usize> {
        match *self {
            Decision::Unique(m) => Some(m),
            Decision::Tie { chosen, .. } => Some(chosen),
            Decision::None => None,
        }
    }

    pub fn is_tie(&self) -> bool {
        matches!(self, Decision::Tie { .. })
    }
}

fn check_window(window: &[usize], payload_len: usize, ny: usize) -> Result<(), CodecError> {
    if window.len() != payload_len {
        return Err(CodecError::WindowLength {
            expected: payload_len,
            got: window.len(),
        });
    }
    if let Some(&y) = window.iter().find(|&&y| y >= ny) {
        return Err(CodecError::UnknownSymbol { symbol: y, size: ny });
    }
    Ok(())
}

/// Joint-typicality test against `P(x) Q(y|x)` with margin `2/log2 n'`.
#[derive(Debug, Clone)]
pub struct TypicalityDecoder {
    target: Vec<f64>,
    nx: usize,
    ny: usize,
    payload_len: usize,
    margin: f64,
}

impl TypicalityDecoder {
    pub fn new(p: &Dist, dmc: &Dmc, payload_len: usize) -> Self {
        let (nx, ny) = (dmc.x_len(), dmc.y_len());
        let mut target = vec![0.0; nx * ny];
        for x in 0..nx {
            for y in 0..ny {
                target[x * ny + y] = p.probs()[x] * dmc.row(x)[y];
            }
        }
        TypicalityDecoder {
            target,
            nx,
            ny,
            payload_len,
            margin: typicality_margin(payload_len),
        }
    }

    pub fn for_codebook(cb: &Codebook, dmc: &Dmc) -> Self {
        Self::new(&cb.composition, dmc, cb.payload_len())
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// L1 distance between the joint type of `(payload, window)` and the target.
    pub fn distance(&self, payload: &[usize], window: &[usize], scratch: &mut Vec<u32>) -> f64 {
        scratch.clear();
        scratch.resize(self.nx * self.ny, 0);
        for (&x, &y) in payload.iter().zip(window) {
            scratch[x * self.ny + y] += 1;
        }
        let n = payload.len() as f64;
        scratch
            .iter()
            .zip(&self.target)
            .map(|(&c, &t)| (c as f64 / n - t).abs())
            .sum()
    }

    pub fn is_typical(&self, payload: &[usize], window: &[usize], scratch: &mut Vec<u32>) -> bool {
        self.distance(payload, window, scratch) <= self.margin + 1e-12
    }

    /// Decodes `window` against every payload of `cb`.
    pub fn decode<R: Rng + ?Sized>(&self, cb: &Codebook, window: &[usize], rng: &mut R) -> Decision {
        debug_assert_eq!(window.len(), self.payload_len);
        let mut scratch = Vec::with_capacity(self.nx * self.ny);
        let mut hits = Vec::new();
        for m in 0..cb.messages() {
            if self.is_typical(cb.payload(m), window, &mut scratch) {
                hits.push(m);
            }
        }
        pick(&hits, rng)
    }
}

fn pick<R: Rng + ?Sized>(hits: &[usize], rng: &mut R) -> Decision {
    match hits.len() {
        0 => Decision::None,
        1 => Decision::Unique(hits[0]),
        k => Decision::Tie {
            chosen: hits[rng.gen_range(0..k)],
            candidates: k,
        },
    }
}

/// One-shot typicality test of a payload against an output window.
pub fn typicality_check(
    payload: &[usize],
    window: &[usize],
    p: &Dist,
    dmc: &Dmc,
) -> Result<bool, CodecError> {
    check_window(window, payload.len(), dmc.y_len())?;
    if let Some(&x) = payload.iter().find(|&&x| x >= dmc.x_len()) {
        return Err(CodecError::UnknownSymbol {
            symbol: x,
            size: dmc.x_len(),
        });
    }
    let dec = TypicalityDecoder::new(p, dmc, payload.len());
    Ok(dec.is_typical(payload, window, &mut Vec::new()))
}

pub fn typicality_decode<R: Rng + ?Sized>(
    cb: &Codebook,
    dmc: &Dmc,
    window: &[usize],
    rng: &mut R,
) -> Result<Decision, CodecError> {
    check_window(window, cb.payload_len(), dmc.y_len())?;
    Ok(TypicalityDecoder::for_codebook(cb, dmc).decode(cb, window, rng))
}

/// Maximum empirical mutual information decoder.
///
/// Decodes the argmax when its empirical MI reaches `threshold` and beats the
/// best strictly smaller value by at least `1/log2 n'`. Payloads sharing the
/// top value exactly form a tie group resolved uniformly at random.
#[derive(Debug, Clone)]
pub struct MmiDecoder {
    nx: usize,
    ny: usize,
    payload_len: usize,
    threshold: f64,
    margin: f64,
}

impl MmiDecoder {
    pub fn new(nx: usize, ny: usize, payload_len: usize, threshold: f64) -> Self {
        MmiDecoder {
            nx,
            ny,
            payload_len,
            threshold,
            margin: 1.0 / (payload_len as f64).log2(),
        }
    }

    pub fn for_codebook(cb: &Codebook, dmc: &Dmc, threshold: f64) -> Self {
        Self::new(dmc.x_len(), dmc.y_len(), cb.payload_len(), threshold)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Mutual information of the joint type of `(payload, window)`, in bits.
    pub fn empirical_mi(&self, payload: &[usize], window: &[usize], scratch: &mut Vec<u32>) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        scratch.clear();
        scratch.resize(nx * ny + nx + ny, 0);
        for (&x, &y) in payload.iter().zip(window) {
            scratch[x * ny + y] += 1;
            scratch[nx * ny + x] += 1;
            scratch[nx * ny + nx + y] += 1;
        }
        let n = payload.len() as f64;
        let mut acc = 0.0;
        for x in 0..nx {
            let cx = scratch[nx * ny + x];
            if cx == 0 {
                continue;
            }
            for y in 0..ny {
                let c = scratch[x * ny + y];
                if c > 0 {
                    let cy = scratch[nx * ny + nx + y];
                    acc += c as f64 * ((c as f64 * n) / (cx as f64 * cy as f64)).log2();
                }
            }
        }
        (acc / n).max(0.0)
    }

    pub fn decode<R: Rng + ?Sized>(&self, cb: &Codebook, window: &[usize], rng: &mut R) -> Decision {
        debug_assert_eq!(window.len(), self.payload_len);
        let mut scratch = Vec::new();
        let scores: Vec<f64> = (0..cb.messages())
            .map(|m| self.empirical_mi(cb.payload(m), window, &mut scratch))
            .collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(top >= self.threshold) {
            return Decision::None;
        }
        let eq = |s: f64| (s - top).abs() <= 1e-12;
        let runner_up = scores
            .iter()
            .copied()
            .filter(|&s| !eq(s))
            .fold(f64::NEG_INFINITY, f64::max);
        if top - runner_up < self.margin {
            return Decision::None;
        }
        let hits: Vec<usize> = (0..scores.len()).filter(|&m| eq(scores[m])).collect();
        pick(&hits, rng)
    }
}

pub fn mmi_decode<R: Rng + ?Sized>(
    cb: &Codebook,
    dmc: &Dmc,
    window: &[usize],
    threshold: f64,
    rng: &mut R,
) -> Result<Decision, CodecError> {
    check_window(window, cb.payload_len(), dmc.y_len())?;
    Ok(MmiDecoder::for_codebook(cb, dmc, threshold).decode(cb, window, rng))
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::testutil;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn codebooks_verify_and_round_trip(
            spec in testutil::channel(2..=3, 2..=3),
            p in testutil::prob_vec(3, 0.3),
            n in 16usize..80,
            b in 1u32..6,
            preamble: bool,
            seed: u64,
        ) {
            let dmc = spec.build().unwrap();
            let p = Dist::normalized(&p[..dmc.x_len()]).unwrap();
            let cb = generate_codebook(&dmc, &p, n, b, preamble, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(cb.verify(&dmc).is_ok());
            prop_assert_eq!(cb.payload_len() + cb.preamble_len, n);
            prop_assert_eq!(Codebook::from_json(&cb.to_json()).unwrap(), cb.clone());
            let again = generate_codebook(&dmc, &p, n, b, preamble, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(again, cb);
        }

        #[test]
        fn mmi_is_symmetric_in_relabelling(xs in prop::collection::vec(0usize..3, 8..60), shift in 1usize..3, seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<usize> = xs.iter().map(|_| rng.gen_range(0..3)).collect();
            let dec = MmiDecoder::new(3, 3, xs.len(), 0.0);
            let mut scratch = Vec::new();
            let a = dec.empirical_mi(&xs, &ys, &mut scratch);
            let relabelled: Vec<usize> = xs.iter().map(|x| (x + shift) % 3).collect();
            let b = dec.empirical_mi(&relabelled, &ys, &mut scratch);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0 && a <= 3f64.log2() + 1e-12);
        }
    }
}
