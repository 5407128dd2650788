//! Keyed random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is the four words
//! `(seed, run, algorithm tag, purpose tag)` laid out little-endian. ChaCha is
//! a keyed PRF, so distinct keys give independent sequences and no two runs
//! ever share generator state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Instance,
    Reward,
    Policy,
    Estimate,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Instance => 0x696e_7374,
            Purpose::Reward => 0x7277_7264,
            Purpose::Policy => 0x706f_6c79,
            Purpose::Estimate => 0x6573_746d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub run: u64,
    /// Algorithm tag; 0 for streams shared by every algorithm of a run.
    pub algorithm: u64,
    pub purpose: Purpose,
}

impl StreamId {
    pub fn new(run: u64, algorithm: u64, purpose: Purpose) -> Self {
        StreamId {
            run,
            algorithm,
            purpose,
        }
    }
}

/// A seeded, reproducible random stream owned by a single run.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    id: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut key = [0u8; 32];
        let words = [seed, id.run, id.algorithm, id.purpose.tag()];
        for (chunk, word) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream {
            seed,
            id,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
