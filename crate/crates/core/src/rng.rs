//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline flows from one configured seed.
//! Sub-streams (per slide, per tree, per fold, per augmentation draw) are
//! derived by mixing the parent seed with stream labels through splitmix64,
//! which is stable across platforms and releases, unlike `DefaultHasher`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; bijective on u64.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of labels into `seed`, one splitmix round per label.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut s = splitmix64(seed);
    for &l in labels {
        s = splitmix64(s ^ l);
    }
    s
}

/// Folds a string label (e.g. a slide id) into a u64 via FNV-1a.
pub fn hash_label(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded deterministic RNG used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
