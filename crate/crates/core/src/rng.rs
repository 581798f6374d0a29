//! Seedable, splittable random streams.
//!
//! Every consumer of randomness receives its own [`SimRng`]. Streams are derived
//! from a `(seed, stream)` pair on top of ChaCha8, so two sub-streams of the same
//! seed never share state and a run is reproducible from its seed alone.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-known sub-stream identifiers used by the simulation harness.
pub mod streams {
    pub const MODEL: u64 = 1;
    pub const WORLD_CHANNEL: u64 = 2;
    pub const GROUND_TRUTH: u64 = 3;
    pub const SENSING: u64 = 4;
    pub const AGENT: u64 = 5;
    pub const REFERENCE: u64 = 6;
    pub const CONFUSION: u64 = 7;
}

#[derive(Clone, Debug)]
pub struct SimRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Independent stream derived from the same seed. Splitting does not advance `self`.
    pub fn split(&self, stream: u64) -> Self {
        // Nested splits stay distinct from top-level streams.
        let id = self.stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream;
        Self::with_stream(self.seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
