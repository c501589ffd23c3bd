//! Counter-based random streams.
//!
//! Every chain draws from a ChaCha8 keystream keyed by the run seed, with the
//! chain index as the stream id. The generator position is a plain 128-bit
//! word counter, so a chain can be checkpointed and resumed bit-exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type ChainRng = ChaCha8Rng;

/// Name recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 + per-chain stream";

/// Independent stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Serializable generator position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPosition {
    pub seed: u64,
    pub stream: u64,
    /// Stored as a string since JSON numbers cannot hold a u128.
    pub word_pos: String,
}

impl RngPosition {
    pub fn capture(seed: u64, rng: &ChainRng) -> Self {
        Self {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Option<ChainRng> {
        let pos: u128 = self.word_pos.parse().ok()?;
        let mut rng = stream(self.seed, self.stream);
        rng.set_word_pos(pos);
        Some(rng)
    }
}
