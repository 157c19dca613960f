//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from a master seed and a tuple of integer coordinates (restart
//! index, sweep cell, ...). Derivation folds each coordinate through the
//! SplitMix64 finalizer:
//!
//! ```text
//! h0 = mix(master ^ 0x9E3779B97F4A7C15)
//! h_{i+1} = mix(h_i ^ mix(part_i + 0x9E3779B97F4A7C15 * (i + 1)))
//! ```
//!
//! so streams for different coordinates are decorrelated, and the result does
//! not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive(master: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(master ^ GOLDEN);
    for (i, &p) in parts.iter().enumerate() {
        h = mix64(h ^ mix64(p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1))));
    }
    h
}

pub fn rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, parts))
}
