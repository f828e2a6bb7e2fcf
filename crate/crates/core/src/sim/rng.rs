//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by `(seed, purpose)` and selected
//! by a 64-bit stream index (the trial number). Channel outputs are addressed
//! by time: the uniform driving the output at time `t` is read at word offset
//! `2t`, so it does not depend on which other times were drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Codebook = 1,
    Message = 2,
    Output = 3,
    Decoder = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sequential stream `index` for `purpose`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ (purpose as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Random access to the per-time uniforms of one trial.
#[derive(Debug, Clone)]
pub struct TimeIndexed {
    rng: ChaCha8Rng,
}

impl TimeIndexed {
    pub fn new(seed: u64, trial: u64) -> Self {
        TimeIndexed {
            rng: stream(seed, Purpose::Output, trial),
        }
    }

    /// Uniform in `[0, 1)` attached to time `t`.
    pub fn uniform_at(&mut self, t: u64) -> f64 {
        self.rng.set_word_pos(2 * t as u128);
        self.rng.gen::<f64>()
    }
}
