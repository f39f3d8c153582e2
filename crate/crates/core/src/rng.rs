//! Counter-based random numbers keyed by `(seed, stream, position)`.
//!
//! Each matrix entry owns four consecutive 64-bit words of the ChaCha8
//! keystream, so the value of an entry depends only on the seed, the sample
//! index (used as the ChaCha stream id) and the entry index. Reading the
//! words sequentially gives the same numbers as seeking to each entry, which
//! keeps sampling fast while staying independent of scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// 64-bit words reserved per entry.
pub const WORDS_PER_ENTRY: u64 = 4;

#[derive(Debug, Clone)]
pub struct KeyedStream {
    inner: ChaCha8Rng,
}

impl KeyedStream {
    /// Stream positioned at the start of `entry`.
    pub fn new(seed: u64, stream: u64, entry: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        // Word positions count 32-bit words.
        inner.set_word_pos(u128::from(entry) * u128::from(WORDS_PER_ENTRY) * 2);
        Self { inner }
    }

    /// The four words of the next entry.
    pub fn next_entry(&mut self) -> [u64; 4] {
        [
            self.inner.next_u64(),
            self.inner.next_u64(),
            self.inner.next_u64(),
            self.inner.next_u64(),
        ]
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`, safe to pass to `ln`.
pub fn unit_open_f64(word: u64) -> f64 {
    1.0 - unit_f64(word)
}

/// Standard normal from two words by the Box–Muller transform.
pub fn box_muller(w0: u64, w1: u64) -> f64 {
    let r = (-2.0 * unit_open_f64(w0).ln()).sqrt();
    r * (std::f64::consts::TAU * unit_f64(w1)).cos()
}
