//! Seeded random streams.
//!
//! Every replication draws from its own `Xoshiro256PlusPlus` stream seeded by
//! [`derive_seed`]`(master, index)`, so a sweep produces the same numbers no
//! matter which worker runs which cell or in what order.

use rand_core::{RngCore, SeedableRng};
pub use rand_xoshiro::Xoshiro256PlusPlus;

/// Name of the generator, pinned into report headers.
pub const GENERATOR: &str = "xoshiro256++ (seed_from_u64 via splitmix64); stream seed = splitmix64_finalize(master ^ index * 0x9e3779b97f4a7c15)";

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer: a bijective avalanche of all 64 bits.
#[inline]
pub fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th stream under `master`.
#[inline]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64_finalize(master ^ index.wrapping_mul(GOLDEN_GAMMA))
}

pub fn stream(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn substream(master: u64, index: u64) -> Xoshiro256PlusPlus {
    stream(derive_seed(master, index))
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(0, 1]`; safe to take the logarithm of.
#[inline]
pub fn open_unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - unit_f64(rng)
}

#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open_unit_f64(rng).ln() / rate
}

/// Unbiased uniform integer on `0..range` (Lemire's multiply-and-reject).
/// `range` must be non-zero.
#[inline]
pub fn below<R: RngCore + ?Sized>(rng: &mut R, range: u64) -> u64 {
    debug_assert!(range > 0);
    let mut m = (rng.next_u64() as u128) * (range as u128);
    let mut low = m as u64;
    if low < range {
        let threshold = range.wrapping_neg() % range;
        while low < threshold {
            m = (rng.next_u64() as u128) * (range as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Unbiased uniform integer on `lo..=hi`.
#[inline]
pub fn uniform_inclusive<R: RngCore + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    debug_assert!(lo <= hi);
    match (hi - lo).checked_add(1) {
        Some(range) => lo + below(rng, range),
        None => rng.next_u64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), a.len());
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        assert_ne!(derive_seed(42, 7), derive_seed(43, 7));
    }

    #[test]
    fn splitmix_reference_value() {
        // First output of SplitMix64 seeded with 0 is finalize(0 + gamma).
        assert_eq!(splitmix64_finalize(GOLDEN_GAMMA), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn below_is_unbiased_on_small_range() {
        let mut rng = stream(1);
        let mut counts = [0u32; 3];
        for _ in 0..300_000 {
            counts[below(&mut rng, 3) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 - 100_000.0).abs() < 5.0 * (300_000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt());
        }
    }

    #[test]
    fn uniform_inclusive_hits_both_ends() {
        let mut rng = stream(9);
        let mut seen = [false; 4];
        for _ in 0..1000 {
            seen[(uniform_inclusive(&mut rng, 5, 8) - 5) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(uniform_inclusive(&mut rng, 3, 3), 3);
    }

    #[test]
    fn unit_interval_bounds() {
        let mut rng = stream(3);
        for _ in 0..10_000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
            let v = open_unit_f64(&mut rng);
            assert!(v > 0.0 && v <= 1.0);
        }
    }
}
