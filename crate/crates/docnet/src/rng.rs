//! Seeded random streams.
//!
//! Every stochastic stage draws from a named sub-stream of one root seed, so
//! two runs with the same seed are bit-identical and changing one stage (say,
//! negative sampling) leaves the others untouched.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Derive a deterministic sub-stream of `root` identified by `name`.
pub fn substream(root: u64, name: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(root ^ fnv1a(name.as_bytes()))
}

// FNV-1a, inlined so stream derivation never depends on std hasher internals.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Uniform draw from `[0, 1)`.
pub fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    rng.gen::<f64>()
}

/// Standard normal draw via Box-Muller.
pub fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform integer in `[0, n)`.
pub fn below(rng: &mut ChaCha20Rng, n: usize) -> usize {
    rng.gen_range(0..n)
}
