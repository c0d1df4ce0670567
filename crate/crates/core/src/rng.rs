//! Keyed random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream whose seed is a
//! SplitMix64 fold of the master seed and a list of tags (purpose, node id,
//! round, ...). Results therefore never depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags mixed into stream keys.
pub mod purpose {
    pub const INIT_PARAMS: u64 = 1;
    pub const LOCAL_NODE: u64 = 2;
    pub const EVALUATION: u64 = 3;
    pub const SHARD: u64 = 4;
    pub const DISTILL: u64 = 5;
    pub const PARTITION: u64 = 6;
    pub const BIAS_CHECK: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit key for `(seed, tags…)`.
pub fn derive_key(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_key(seed, tags))
}

/// Stream for local node `node` during global round `round`.
pub fn node_stream(seed: u64, node: usize, round: usize) -> StreamRng {
    stream(seed, &[purpose::LOCAL_NODE, node as u64, round as u64])
}
