//! Deterministic randomness: seeded ChaCha streams plus the handful of draw
//! primitives the simulator needs.
//!
//! Seeds derive hierarchically (master → point → trial → leg) so that adding
//! sweep points never perturbs the randomness of existing trials, and so that
//! trials can run in parallel yet produce byte-identical records at any
//! thread count. The Gaussian sampler is pinned here (Box-Muller) rather than
//! delegated to a distributions crate: the exact draw order is part of the
//! determinism contract.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Create a deterministic generator from a 64-bit seed.
pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; good avalanche for seed mixing.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from (parent, lane). Stable across releases.
pub fn derive_seed(parent: u64, lane: u64) -> u64 {
    splitmix(parent ^ splitmix(lane.wrapping_add(0x51ed_270b_a0fc_8d21)))
}

/// Derive a child seed from (parent, a, b).
pub fn derive_seed2(parent: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(parent, a), b)
}

/// Uniform in [0, 1) with 53 bits of precision.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in [0, n] inclusive.
pub fn uniform_u32_inclusive(rng: &mut ChaCha8Rng, n: u32) -> u32 {
    // Modulo bias is negligible for the small ranges used here (n << 2^32),
    // and a fixed consumption of one word keeps the draw order simple.
    if n == u32::MAX {
        return rng.next_u32();
    }
    rng.next_u32() % (n + 1)
}

/// One pair of independent standard normal samples (Box-Muller).
pub fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut u1 = uniform_f64(rng);
    if u1 <= 0.0 {
        u1 = f64::MIN_POSITIVE;
    }
    let u2 = uniform_f64(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = chacha(42);
        let mut b = chacha(42);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_seeds_distinct_per_lane() {
        let s: Vec<u64> = (0..64).map(|i| derive_seed(7, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), s.len());
    }

    #[test]
    fn normal_pairs_have_unit_variance() {
        let mut rng = chacha(3);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n = 200_000;
        for _ in 0..n / 2 {
            let (a, b) = standard_normal_pair(&mut rng);
            sum += a + b;
            sum_sq += a * a + b * b;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
