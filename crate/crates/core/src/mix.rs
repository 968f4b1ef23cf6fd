//! Counter-based 64-bit mixing used for every random quantity.
//!
//! A random value is never drawn from a stateful stream shared between
//! sites or tasks. Instead it is a pure function of `(seed, key)`, where the
//! key is a task index or the canonical coordinates of a site. The mixer is
//! the SplitMix64 finalizer applied to `splitmix64(seed) ^ key`, so results
//! do not depend on evaluation order or thread count.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and `key`.
#[inline]
pub fn mix(seed: u64, key: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ key)
}

/// Folds a slice of keys into `seed`.
#[inline]
pub fn mix_all(seed: u64, keys: &[i64]) -> u64 {
    keys.iter().fold(seed, |h, &k| mix(h, k as u64))
}

/// Maps 64 random bits to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_range() {
        assert_eq!(unit_interval(0), 0.0);
        assert!(unit_interval(u64::MAX) < 1.0);
    }

    #[test]
    fn mix_is_order_sensitive() {
        assert_ne!(mix_all(7, &[1, 2]), mix_all(7, &[2, 1]));
        assert_eq!(mix_all(7, &[1, 2]), mix(mix(7, 1), 2));
    }

    #[test]
    fn uniform_bits_look_uniform() {
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| unit_interval(mix(42, i))).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }
}
