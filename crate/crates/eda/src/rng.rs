//! Seeded randomness helpers.
//!
//! Everything in the crate that samples draws from a [`ChaCha8Rng`] so runs
//! are bit-reproducible for a given seed on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic RNG seeded from a single `u64`.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a sub-seed for a named sub-task of a run.
///
/// Mixing the label in keeps e.g. the five annotators' initializations
/// decoupled while still being a pure function of the run seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    seed ^ fnv1a(label.as_bytes())
}

/// Derive an independent stream for a named sub-task of a run.
pub fn derive(seed: u64, label: &str) -> ChaCha8Rng {
    seeded(derive_seed(seed, label))
}

/// Uniform `f64` in `[0, 1)`.
pub fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform `f64` in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * next_f64(rng)
}

/// Uniform `usize` in `[0, n)`. `n` must be positive.
pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    // Modulo bias is irrelevant at the sizes used here (n << 2^64).
    (rng.next_u64() % n as u64) as usize
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// FNV-1a 64-bit hash; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
