//! Stable 64-bit mixing used to derive per-step seeds.
//!
//! `std`'s hashers are not guaranteed stable across releases, so seeds are
//! derived with the SplitMix64 finalizer instead.

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `candidate`-th option at step `step` of a path started from
/// `start_seed`.
pub fn step_seed(start_seed: u64, step: usize, candidate: usize) -> u64 {
    let a = mix64(start_seed);
    let b = mix64(a ^ (step as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    mix64(b ^ (candidate as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Maps a hash to a uniform value in `[0, 1)` using its top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn step_seeds_distinct_within_run() {
        let mut seen = HashSet::new();
        for start in 0..8u64 {
            for t in 0..32 {
                for c in 0..16 {
                    assert!(seen.insert(step_seed(start, t, c)));
                }
            }
        }
    }

    #[test]
    fn unit_range() {
        for i in 0..1000u64 {
            let u = unit_f64(mix64(i));
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_f64(u64::MAX), 1.0 - f64::EPSILON / 2.0);
    }
}
