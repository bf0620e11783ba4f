//! Deterministic random-number plumbing.
//!
//! Every random draw in the crate flows through a ChaCha8 stream keyed by a
//! tuple of integers (seed, trial, step, oracle id, ...), so results are
//! reproducible bit-for-bit and independent streams never share state. The
//! exact construction, fixed so instances can be replayed outside this crate:
//!
//! - the key is built by folding the tuple through splitmix64: starting from
//!   `acc = 0x9E3779B97F4A7C15`, for each part `acc = splitmix64(acc ^ part)`;
//!   the 32-byte ChaCha8 seed is the little-endian concatenation of the next
//!   four splitmix64 outputs;
//! - uniform doubles come from the top 53 bits of `next_u64`:
//!   `unit_open` maps to (0, 1] via `((u >> 11) + 1) * 2^-53`, `unit` maps to
//!   [0, 1) via `(u >> 11) * 2^-53`;
//! - normal deviates use the Box–Muller cosine branch only:
//!   `z = sqrt(-2 ln u1) * cos(2 pi u2)` with `u1 = unit_open`, `u2 = unit`,
//!   consuming exactly two `next_u64` draws per deviate.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 stream keyed by a tuple of integers.
pub fn keyed(parts: &[u64]) -> ChaCha8Rng {
    let mut acc = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        acc = splitmix64(acc);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform on [0, 1).
pub fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on (0, 1]; safe as an argument to `ln`.
pub fn unit_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on [lo, hi).
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Gaussian deviate via the documented Box–Muller transform.
pub fn normal(rng: &mut impl RngCore, mean: f64, sd: f64) -> f64 {
    let u1 = unit_open(rng);
    let u2 = unit(rng);
    mean + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
