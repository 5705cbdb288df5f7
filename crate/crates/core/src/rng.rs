//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed. Replicate `r` of a
//! Monte-Carlo study draws from stream `r` of the base seed, so replicates are
//! independent and can run in any order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Generator for a single seed.
pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`.
pub fn split(seed: u64, index: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for APIs that take a seed rather than a generator.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
