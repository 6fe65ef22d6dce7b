//! Splittable deterministic random streams.
//!
//! A stream is a ChaCha8 keystream keyed by the master seed and selecting the
//! 64-bit ChaCha stream number by `stream_id`. Streams are counter based, so
//! run `j` of an ensemble sees the same draws no matter which thread runs it or
//! in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id namespaces so that unrelated consumers of one master seed never
/// share a stream.
pub mod namespace {
    /// Pursuit run `j` on channel `c`: `RUNS + (c << 32) + j`.
    pub const RUNS: u64 = 0;
    /// Noise synthesis.
    pub const NOISE: u64 = 2 << 48;
    /// Clean-signal synthesis (random sparse supports, gains).
    pub const SIGNAL: u64 = 3 << 48;
    /// Monte-Carlo threshold calibration.
    pub const CALIBRATION: u64 = 4 << 48;
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Deterministic stream for `(master_seed, stream_id)`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    RandomStream {
        master_seed,
        stream_id,
        rng,
    }
}

impl RandomStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: usize) -> usize {
        use rand::Rng;
        self.rng.random_range(0..bound)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
