//! Seeded randomness.
//!
//! Every stochastic routine draws from [`QapRng`], which is ChaCha8 (the
//! `rand_chacha` stream cipher generator with 8 rounds) seeded from a `u64`
//! through `SeedableRng::seed_from_u64`. Sub-streams are derived with
//! [`mix64`], the SplitMix64 finalizer, so any single instance or episode can
//! be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type QapRng = ChaCha8Rng;

pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64";

pub fn rng_from_seed(seed: u64) -> QapRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `master ⊕ mix64(index)`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    master ^ mix64(index)
}

/// Seed for a named stream, e.g. the evaluation graphs of a training run.
pub fn stream_seed(master: u64, stream: u64, index: u64) -> u64 {
    split_seed(master ^ mix64(stream.wrapping_mul(0xA24B_AED4_963E_E407)), index)
}
