//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single user-supplied 64-bit seed.
//! Independent generators (subspaces, coefficients, supports, noise, ...) are
//! derived by mixing the base seed with a fixed stream tag through SplitMix64,
//! so each stream is independently reproducible and insensitive to how many
//! draws the other streams consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent generators used by [`crate::datagen`].
pub mod stream {
    pub const SUBSPACE: u64 = 1;
    pub const COEFFICIENTS: u64 = 2;
    pub const SUPPORT: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const OUTLIER: u64 = 5;
}

/// SplitMix64 finalizer; bijective on `u64`, good avalanche behaviour.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for stream `tag` from the base seed.
pub fn derive(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}

/// A ChaCha generator for stream `tag` of `base`. ChaCha is used everywhere
/// because its output is identical across platforms and rand releases.
pub fn rng_for(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag))
}
