//! Seed addressing.
//!
//! Every random draw in the crate is addressed by a `(master_seed, stream_id)`
//! pair and, for Markov chains, by the chain index and step counter as well.
//! Chain `c` at step `t` reads its uniforms from a ChaCha8 keystream keyed by
//! the ensemble seed, with stream `c` and word offset `t * words_per_step`, so
//! any step of any chain can be replayed without carrying generator state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A `(master_seed, stream_id)` pair naming one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Sequential generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A child seed for a named sub-task; distinct labels give unrelated keys.
    pub fn derive(&self, label: u64) -> SeedSpec {
        SeedSpec {
            master_seed: mix3(self.master_seed, self.stream_id, label),
            stream_id: 0,
        }
    }

    /// Key used for per-chain keystreams of an ensemble built from this seed.
    pub(crate) fn chain_key(&self) -> u64 {
        mix3(self.master_seed, self.stream_id, 0x6368_6169_6e73)
    }
}

/// Labels for the sub-streams derived from a training or experiment seed.
pub mod labels {
    pub const MODEL_INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const NEGATIVE: u64 = 3;
    pub const PERSISTENT: u64 = 4;
    pub const GENERATE: u64 = 5;
    pub const AIS: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const SYNTH: u64 = 8;
    pub const REFERENCE: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mix3(a: u64, b: u64, c: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(a) ^ b) ^ c)
}

/// Generator positioned at `(key, stream, word offset)`.
pub(crate) fn addressed_rng(key: u64, stream: u64, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    rng
}

/// Uniform in [0, 1) from exactly one `u64` (two keystream words).
#[inline]
pub(crate) fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index in `0..n` from exactly one `u64`; bias is below `n / 2^64`.
#[inline]
pub(crate) fn index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Fisher-Yates shuffle driven by [`index`].
pub(crate) fn shuffle<T, R: RngCore + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}
