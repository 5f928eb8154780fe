//! Seed derivation for reproducible runs.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds its
//! own ChaCha stream from it, so results are a pure function of
//! `(inputs, seed)` regardless of call order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The RNG used throughout the crate.
pub type SeededRng = ChaCha12Rng;

/// Build a generator from a bare seed.
pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Derive an independent child seed from a parent seed and a context label.
///
/// SplitMix64 finalizer over the combined words; two distinct
/// `(parent, label, index)` triples give unrelated streams.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = parent ^ 0x9e37_79b9_7f4a_7c15;
    for &b in label.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
