//! Seeded generator streams.
//!
//! A run seed owns a family of ChaCha streams: one for the outer chain, one
//! for Q-sampling rollouts and one for the output-index draw. Batch work items
//! use their index as the stream number.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const CHAIN_STREAM: u64 = 0;
pub const ROLLOUT_STREAM: u64 = 1;
pub const OUTPUT_STREAM: u64 = 2;

/// Generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
