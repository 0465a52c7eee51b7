//! Random-stream layout for an episode.
//!
//! One root seed feeds independent ChaCha streams: a utility stream and a
//! strategy stream per agent plus one mechanism stream. Consumers never share
//! a stream, so changing how one of them draws leaves the others untouched.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MECHANISM_STREAM: u64 = u64::MAX;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Utility stream for a 0-based agent index.
pub fn utility_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    stream(seed, 2 * agent as u64)
}

/// Strategy stream for a 0-based agent index.
pub fn strategy_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    stream(seed, 2 * agent as u64 + 1)
}

/// Stream used for audit coins.
pub fn mechanism_stream(seed: u64) -> ChaCha8Rng {
    stream(seed, MECHANISM_STREAM)
}

/// Seed of replication `r`, a pure function of `(base_seed, r)`.
pub fn replication_seed(base_seed: u64, r: u64) -> u64 {
    // Stream ids below 2^63 are taken by agents; use the top half for seeding.
    stream(base_seed, (1u64 << 63) | r).next_u64()
}
