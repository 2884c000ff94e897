//! Seed derivation shared by every randomized component.
//!
//! Child seeds are derived from a parent seed and a path of integers, so
//! parallel workers (forest trees, ensemble members, CV folds) produce the
//! same result regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`, one splitmix round per component.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Hash of a feature vector's bit patterns, used to seed per-query models.
pub fn hash_f64s(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(0xCBF2_9CE4_8422_2325u64, |acc, v| splitmix64(acc ^ v.to_bits()))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
