//! Seed plumbing. Every stochastic step draws from a ChaCha8 stream whose
//! seed is derived from one top-level seed, so runs are reproducible across
//! platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed for `(stream, index)` from `base`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    mix(mix(base ^ mix(stream)) ^ index)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream identifiers used with [`derive_seed`].
pub mod stream {
    pub const CLASS_ASSIGNMENT: u64 = 1;
    pub const MOTION_EVENTS: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const WEIGHT_INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const PHANTOM: u64 = 6;
}
