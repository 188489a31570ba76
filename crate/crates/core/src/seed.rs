//! Reproducible random streams.
//!
//! Every random computation takes a [`SeedSpec`]. The stream seed is derived
//! from `(master_seed, task_index)` with the SplitMix64 finaliser:
//!
//! ```text
//! s     = mix(master_seed ^ mix(task_index ^ 0x9E3779B97F4A7C15))
//! key_i = mix(s + (i + 1) * 0x9E3779B97F4A7C15),  i = 0..3
//! ```
//!
//! and the four words (little endian) key a ChaCha8 block cipher run in
//! counter mode. Both steps are integer-only, so streams are bit-identical
//! across platforms. `mix` is a bijection on `u64`, hence distinct task
//! indices under one master seed give distinct keys.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub task_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, task_index: u64) -> Self {
        SeedSpec {
            master_seed,
            task_index,
        }
    }

    pub fn stream_id(&self) -> u64 {
        mix64(self.master_seed ^ mix64(self.task_index ^ GOLDEN))
    }

    pub fn key(&self) -> [u8; 32] {
        let s = self.stream_id();
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let w = mix64(s.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }

    /// An independent sub-stream, e.g. for the Monte Carlo part of a task.
    pub fn child(&self, label: u64) -> SeedSpec {
        SeedSpec {
            master_seed: self.stream_id(),
            task_index: label,
        }
    }
}
