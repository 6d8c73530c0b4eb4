//! Seeding rules.
//!
//! Every random stream in the engine is a ChaCha8 generator. Sub-seeds are
//! derived from a master seed by XOR with the 64-bit FNV-1a hash of a stage
//! tag, so the same master seed always reproduces the same run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type EngineRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// `master ⊕ fnv1a(tag)`.
pub fn sub_seed(master: u64, tag: &str) -> u64 {
    master ^ fnv1a(tag.as_bytes())
}

pub fn rng_from_seed(seed: u64) -> EngineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(master: u64, tag: &str) -> EngineRng {
    rng_from_seed(sub_seed(master, tag))
}

/// Serializable position of a ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn capture(rng: &EngineRng) -> Self {
        RngSnapshot {
            seed: rng.get_seed(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> EngineRng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
