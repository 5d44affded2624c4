//! Seed derivation for schedule-independent parallelism.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` whose seed is
//! derived from a master seed plus a stable path of indices (pair id, sample
//! id, candidate id, ...). Workers can then run in any order without changing
//! results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for combining seed components.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a path of stream indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut acc = mix(master);
    for (depth, &part) in path.iter().enumerate() {
        acc = mix(acc ^ mix(part.wrapping_add(depth as u64 + 1)));
    }
    acc
}

/// A deterministic RNG for the given master seed and stream path.
pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
