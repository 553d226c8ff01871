//! Seedable, splittable random stream with a serialisable position.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream used for mutation and restart draws.
pub const STREAM_EVOLUTION: u64 = 0;
/// Stream used by simulated judges.
pub const STREAM_JUDGE: u64 = 1;
/// Stream used to draw hidden targets in experiments.
pub const STREAM_TARGET: u64 = 2;

/// Everything needed to resume a stream exactly where it stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

/// ChaCha8 stream identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct EvoRng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl EvoRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner, seed, stream }
    }

    pub fn from_state(state: RngState) -> Self {
        let mut rng = Self::new(state.seed, state.stream);
        rng.inner.set_word_pos(state.word_pos);
        rng
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.inner.get_word_pos(),
        }
    }

    /// An independent stream sharing this stream's seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }
}

impl RngCore for EvoRng {
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
