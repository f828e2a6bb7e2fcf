//! Transmitter schedules and receiver sampling strategies.
//!
//! Times are 1-based channel uses. Four schemes are supported:
//!
//! * `full`: the codeword starts at `nu`, every output is sampled.
//! * `periodic`: codeword symbols go out only at the transmission times
//!   `floor(j/rho)`, idle in between; the receiver samples exactly those times.
//! * `block`: time is cut into superperiods of `floor(n/rho)` slots whose last
//!   `n` slots form a transmission period; the codeword occupies the first
//!   period starting after `nu` and the receiver samples only periods.
//! * `adaptive`: sparse sampling at `ceil(j/rho)` with a sliding type test on
//!   the last `ceil(log2 n)` samples (fewer while the window fills); a type
//!   whose probability under pure noise is at most `n^-2` switches to dense
//!   sampling for at most `n` consecutive slots.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::ceil_log2;
use crate::prob::LogFactorials;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Full,
    Periodic,
    Block,
    Adaptive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Full => "full",
            Scheme::Periodic => "periodic",
            Scheme::Block => "block",
            Scheme::Adaptive => "adaptive",
        }
    }

    /// Whether codewords for this scheme carry a detection preamble.
    pub fn uses_preamble(self) -> bool {
        self == Scheme::Adaptive
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("sampling rate must lie in (0, 1], got {0}")]
    BadRho(f64),
    #[error("codeword length must be at least 1")]
    EmptyCodeword,
    #[error("asynchronism level must be at least 1")]
    BadHorizon,
    #[error("threshold exponent must be positive, got {0}")]
    BadExponent(f64),
}

fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0)).then_some(r)
}

/// `floor(j / rho)`, exact when `j / rho` is an integer up to rounding.
pub fn grid_floor(j: u64, rho: f64) -> u64 {
    let x = j as f64 / rho;
    snap(x).unwrap_or_else(|| x.floor()) as u64
}

/// `ceil(j / rho)`, exact when `j / rho` is an integer up to rounding.
pub fn grid_ceil(j: u64, rho: f64) -> u64 {
    let x = j as f64 / rho;
    snap(x).unwrap_or_else(|| x.ceil()) as u64
}

/// Smallest `j >= 1` with `grid(j) > after`.
fn first_index_after(after: u64, rho: f64, grid: fn(u64, f64) -> u64) -> u64 {
    let mut j = ((after as f64) * rho).floor().max(1.0) as u64;
    while j > 1 && grid(j - 1, rho) > after {
        j -= 1;
    }
    while grid(j, rho) <= after {
        j += 1;
    }
    j
}

/// Timing parameters shared by transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub scheme: Scheme,
    pub rho: f64,
    /// Codeword length, preamble included.
    pub n: u64,
    /// Asynchronism level `A`; `nu` ranges over `1..=A`.
    pub a: u64,
    /// Sparse-mode window, `ceil(log2 n)` samples.
    pub window_len: usize,
    /// `log2` of the switching threshold, `-exponent * log2 n`.
    pub threshold_log2: f64,
}

impl Schedule {
    pub fn new(
        scheme: Scheme,
        rho: f64,
        n: u64,
        a: u64,
        threshold_exponent: f64,
    ) -> Result<Self, SamplingError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(SamplingError::BadRho(rho));
        }
        if n == 0 {
            return Err(SamplingError::EmptyCodeword);
        }
        if a == 0 {
            return Err(SamplingError::BadHorizon);
        }
        if !(threshold_exponent > 0.0) {
            return Err(SamplingError::BadExponent(threshold_exponent));
        }
        Ok(Schedule {
            scheme,
            rho,
            n,
            a,
            window_len: (ceil_log2(n) as usize).max(1),
            threshold_log2: -threshold_exponent * (n as f64).log2(),
        })
    }

    /// Superperiod length `floor(n / rho)` of the block scheme.
    pub fn superperiod(&self) -> u64 {
        grid_floor(self.n, self.rho).max(self.n)
    }

    /// Start of block-scheme transmission period `k` (0-based).
    fn period_start(&self, k: u64) -> u64 {
        let l = self.superperiod();
        k * l + (l - self.n) + 1
    }

    /// Codeword start time for a message arriving at `nu`.
    pub fn tx_start_time(&self, nu: u64) -> u64 {
        match self.scheme {
            Scheme::Full | Scheme::Adaptive => nu,
            Scheme::Periodic => {
                // first transmission time >= nu
                let j = first_index_after(nu - 1, self.rho, grid_floor);
                grid_floor(j, self.rho)
            }
            Scheme::Block => {
                let l = self.superperiod();
                let first = l - self.n + 1;
                let k = if nu < first { 0 } else { (nu - first) / l + 1 };
                self.period_start(k)
            }
        }
    }

    /// Codeword position transmitted at time `t`, or `None` for idle.
    pub fn tx_position(&self, sigma: u64, t: u64) -> Option<usize> {
        if t < sigma {
            return None;
        }
        match self.scheme {
            Scheme::Periodic => {
                let j0 = first_index_after(sigma - 1, self.rho, grid_floor);
                let j = first_index_after(t - 1, self.rho, grid_floor);
                (grid_floor(j, self.rho) == t && j - j0 < self.n).then(|| (j - j0) as usize)
            }
            _ => (t - sigma < self.n).then(|| (t - sigma) as usize),
        }
    }

    /// Time of the last codeword symbol for a start at `sigma`.
    pub fn codeword_end(&self, sigma: u64) -> u64 {
        match self.scheme {
            Scheme::Periodic => {
                let j0 = first_index_after(sigma - 1, self.rho, grid_floor);
                grid_floor(j0 + self.n - 1, self.rho)
            }
            _ => sigma + self.n - 1,
        }
    }

    /// Last channel use that can carry a codeword symbol for any `nu <= A`.
    /// Equals `A + n - 1` for the contiguous schemes.
    pub fn horizon(&self) -> u64 {
        self.codeword_end(self.tx_start_time(self.a))
    }
}

/// Free-function form of [`Schedule::tx_start_time`].
pub fn tx_start_time(scheme: Scheme, rho: f64, n: u64, nu: u64) -> u64 {
    Schedule::new(scheme, rho, n, nu.max(1), 2.0)
        .expect("valid schedule")
        .tx_start_time(nu)
}

/// Symbol sent at time `t`: the codeword symbol or `None` for idle.
pub fn tx_symbol_at(schedule: &Schedule, codeword: &[usize], sigma: u64, t: u64) -> Option<usize> {
    schedule.tx_position(sigma, t).map(|k| codeword[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sparse,
    Dense,
    Done,
}

/// What the receiver should do after a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Sparse sample; the detector did not fire.
    StaySparse,
    /// The detector fired; dense sampling starts at the next slot.
    SwitchDense,
    /// Dense sample; try to decode when `decode` is set.
    DenseStep { decode: bool },
    /// Last dense sample; try to decode when `decode` is set, then go sparse.
    RevertSparse { decode: bool },
    /// Non-adaptive sample; try to decode when `decode` is set.
    Sample { decode: bool },
}

impl Action {
    pub fn wants_decode(self) -> bool {
        match self {
            Action::DenseStep { decode } | Action::RevertSparse { decode } | Action::Sample { decode } => {
                decode
            }
            _ => false,
        }
    }
}

/// Sliding window of the last `cap` symbols with running counts.
#[derive(Debug, Clone)]
struct CountingWindow {
    buf: VecDeque<usize>,
    counts: Vec<u64>,
    cap: usize,
}

impl CountingWindow {
    fn new(cap: usize, alphabet: usize) -> Self {
        CountingWindow {
            buf: VecDeque::with_capacity(cap),
            counts: vec![0; alphabet],
            cap,
        }
    }

    fn push(&mut self, y: usize) {
        if self.buf.len() == self.cap {
            let old = self.buf.pop_front().unwrap();
            self.counts[old] -= 1;
        }
        self.buf.push_back(y);
        self.counts[y] += 1;
    }

    fn clear(&mut self) {
        self.buf.clear();
        self.counts.iter_mut().for_each(|c| *c = 0);
    }

    fn recount(&self) -> Vec<u64> {
        let mut c = vec![0; self.counts.len()];
        for &y in &self.buf {
            c[y] += 1;
        }
        c
    }
}

/// Receiver sampling state for one trial.
#[derive(Debug, Clone)]
pub struct SamplerState {
    schedule: Schedule,
    horizon: u64,
    payload_len: usize,
    mode: Mode,
    /// Sparse or grid index `j` of the next sample.
    next_index: u64,
    next_time: u64,
    dense_remaining: u64,
    samples_taken: u64,
    last_sample_time: u64,
    // adaptive detector
    detect_q: Vec<f64>,
    window: CountingWindow,
    log_fact: LogFactorials,
    // trailing decode window and the length of the contiguous run feeding it
    recent: VecDeque<usize>,
    run_len: usize,
    truncated: bool,
    switches: u64,
}

impl SamplerState {
    /// `detect_q` is the pure-noise law the adaptive detector tests against;
    /// sampling starts strictly after `start_after`.
    pub fn new(schedule: &Schedule, payload_len: usize, detect_q: &[f64], start_after: u64) -> Self {
        let mut s = SamplerState {
            schedule: schedule.clone(),
            horizon: schedule.horizon(),
            payload_len,
            mode: Mode::Sparse,
            next_index: 0,
            next_time: 0,
            dense_remaining: 0,
            samples_taken: 0,
            last_sample_time: start_after,
            detect_q: detect_q.to_vec(),
            window: CountingWindow::new(schedule.window_len, detect_q.len()),
            log_fact: LogFactorials::new(schedule.window_len),
            recent: VecDeque::with_capacity(payload_len),
            run_len: 0,
            truncated: false,
            switches: 0,
        };
        s.seek_after(start_after);
        s
    }

    /// Overrides the horizon (noise-only runs use an arbitrary length).
    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        if self.next_time > horizon {
            self.mode = Mode::Done;
        }
        self
    }

    fn seek_after(&mut self, after: u64) {
        let rho = self.schedule.rho;
        let (j, t) = match self.schedule.scheme {
            Scheme::Full => (after + 1, after + 1),
            Scheme::Adaptive => {
                let j = first_index_after(after, rho, grid_ceil);
                (j, grid_ceil(j, rho))
            }
            Scheme::Periodic => {
                let j = first_index_after(after, rho, grid_floor);
                (j, grid_floor(j, rho))
            }
            Scheme::Block => {
                let l = self.schedule.superperiod();
                let k = after / l;
                let start = self.schedule.period_start(k);
                let t = if after + 1 >= start { after + 1 } else { start };
                (0, t)
            }
        };
        self.next_index = j;
        self.next_time = t;
        if t > self.horizon {
            self.mode = Mode::Done;
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Next sampling time, or `None` once sampling is over.
    pub fn next_sample_time(&self) -> Option<u64> {
        (self.mode != Mode::Done).then_some(self.next_time)
    }

    pub fn samples_taken(&self) -> u64 {
        self.samples_taken
    }

    pub fn last_sample_time(&self) -> u64 {
        self.last_sample_time
    }

    pub fn dense_remaining(&self) -> u64 {
        self.dense_remaining
    }

    /// Times the detector fired.
    pub fn switches(&self) -> u64 {
        self.switches
    }

    /// Dense mode was cut short by the horizon.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Replaces the pure-noise law used by the detector.
    pub fn set_detect_q(&mut self, q: &[f64]) {
        self.detect_q.clear();
        self.detect_q.extend_from_slice(q);
    }

    /// Counts of the sparse detector window.
    pub fn window_counts(&self) -> &[u64] {
        &self.window.counts
    }

    /// Counts recomputed from the window contents.
    pub fn window_recount(&self) -> Vec<u64> {
        self.window.recount()
    }

    /// The last `payload_len` samples of the current contiguous run, if the
    /// run is long enough to decode from.
    pub fn decode_window(&self) -> Option<Vec<usize>> {
        (self.run_len >= self.payload_len && self.recent.len() == self.payload_len)
            .then(|| self.recent.iter().copied().collect())
    }

    fn push_recent(&mut self, t: u64, y: usize) {
        let contiguous = match self.schedule.scheme {
            // consecutive grid samples carry consecutive codeword symbols
            Scheme::Periodic => self.samples_taken > 0,
            _ => self.samples_taken > 0 && t == self.last_sample_time + 1,
        };
        if contiguous {
            self.run_len += 1;
        } else {
            self.run_len = 1;
            self.recent.clear();
        }
        if self.recent.len() == self.payload_len {
            self.recent.pop_front();
        }
        self.recent.push_back(y);
    }

    /// Records output `y` observed at [`next_sample_time`](Self::next_sample_time).
    pub fn observe(&mut self, y: usize) -> Action {
        assert!(self.mode != Mode::Done, "observe after sampling ended");
        let t = self.next_time;
        self.push_recent(t, y);
        self.samples_taken += 1;
        self.last_sample_time = t;
        let rho = self.schedule.rho;

        let action = match (self.schedule.scheme, self.mode) {
            (Scheme::Full, _) => {
                self.next_time = t + 1;
                Action::Sample {
                    decode: self.run_len >= self.payload_len,
                }
            }
            (Scheme::Periodic, _) => {
                self.next_index += 1;
                self.next_time = grid_floor(self.next_index, rho);
                Action::Sample {
                    decode: self.run_len >= self.payload_len,
                }
            }
            (Scheme::Block, _) => {
                let l = self.schedule.superperiod();
                let end = ((t - 1) / l + 1) * l;
                if t == end {
                    self.seek_after(t);
                } else {
                    self.next_time = t + 1;
                }
                Action::Sample {
                    decode: t == end && self.run_len >= self.payload_len,
                }
            }
            (Scheme::Adaptive, Mode::Sparse) => {
                self.window.push(y);
                debug_assert!(
                    !self.samples_taken.is_multiple_of(64) || self.window.counts == self.window.recount()
                );
                // partial windows are tested too, so early arrivals are not missed
                let fire = self
                    .log_fact
                    .log_type_class_prob_counts(&self.window.counts, &self.detect_q)
                    <= self.schedule.threshold_log2;
                if fire {
                    self.mode = Mode::Dense;
                    self.dense_remaining = self.schedule.n;
                    self.switches += 1;
                    self.next_time = t + 1;
                    Action::SwitchDense
                } else {
                    self.next_index += 1;
                    self.next_time = grid_ceil(self.next_index, rho);
                    Action::StaySparse
                }
            }
            (Scheme::Adaptive, Mode::Dense) => {
                self.dense_remaining -= 1;
                let decode = self.run_len >= self.payload_len;
                if self.dense_remaining == 0 {
                    self.mode = Mode::Sparse;
                    self.window.clear();
                    self.seek_after(t);
                    Action::RevertSparse { decode }
                } else {
                    self.next_time = t + 1;
                    Action::DenseStep { decode }
                }
            }
            (Scheme::Adaptive, Mode::Done) => unreachable!(),
        };
        if self.mode != Mode::Done && self.next_time > self.horizon {
            if self.mode == Mode::Dense {
                self.truncated = true;
            }
            self.mode = Mode::Done;
        }
        action
    }
}
