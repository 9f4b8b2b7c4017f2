//! Seedable random source shared by every stochastic stage.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`. Integer draws and shuffles do not go through
//! `rand`'s range sampling, whose output may change between releases; they use
//! the two procedures below, which any implementation can reproduce from the
//! raw `next_u64` stream:
//!
//! * `uniform_int(lo, hi)`: let `span = hi - lo + 1`; draw `x = next_u64()`
//!   and reject while `x >= u64::MAX - (u64::MAX % span)` (when `span` is not a
//!   power of two); return `lo + x % span`.
//! * `sample_indices(len, n)`: partial Fisher-Yates. Start from `0..len`; for
//!   `i` in `0..n`, swap position `i` with `uniform_int(i, len - 1)`; return the
//!   first `n` entries in draw order.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed (SplitMix64 finalizer over seed and stream id).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn uniform_int(rng: &mut impl RngCore, lo: u64, hi: u64) -> u64 {
    assert!(lo <= hi, "empty integer range");
    let span = hi - lo;
    if span == u64::MAX {
        return rng.next_u64();
    }
    let span = span + 1;
    let zone = if span.is_power_of_two() {
        u64::MAX
    } else {
        u64::MAX - (u64::MAX % span)
    };
    loop {
        let x = rng.next_u64();
        if span.is_power_of_two() || x < zone {
            return lo + x % span;
        }
    }
}

pub fn sample_indices(rng: &mut impl RngCore, len: usize, n: usize) -> Vec<usize> {
    assert!(n <= len, "cannot draw {n} of {len} without replacement");
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = uniform_int(rng, i as u64, (len - 1) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_int_stays_in_range() {
        let mut rng = seeded(3);
        for _ in 0..10_000 {
            let x = uniform_int(&mut rng, 5, 11);
            assert!((5..=11).contains(&x));
        }
    }

    #[test]
    fn sample_indices_is_distinct_and_reproducible() {
        let a = sample_indices(&mut seeded(9), 50, 20);
        let b = sample_indices(&mut seeded(9), 50, 20);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 4), derive_seed(7, 4));
    }
}
