//! Seed derivation. Every random stream in a run comes from one top-level
//! seed plus a fixed per-purpose offset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Offset for train/calibration splits.
pub const SPLIT_STREAM: u64 = 0x5011_7000;
/// Offset for k-means++ initialization.
pub const KMEANS_STREAM: u64 = 0x6B6D_0000;
/// Offset for synthetic sample draws.
pub const SYNTH_STREAM: u64 = 0x5E7D_0000;

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_add(stream)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
