//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit RNG. Independent streams for
//! trials (or any indexed sub-task) are derived from a master seed with
//! [`derive_seed`]: `stream(master, i) = splitmix64(master ⊕ splitmix64(i + 1))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Platform-independent generator used throughout the crate.
pub type LabRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> LabRng {
    LabRng::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th sub-stream of `master`.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

pub fn derived_rng(master: u64, index: u64) -> LabRng {
    rng_from_seed(derive_seed(master, index))
}
