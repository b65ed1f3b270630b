//! Seeded sampling of /64 subnets without replacement.
//!
//! A keyed bijection over the `b`-bit subnet index space is evaluated at
//! `0, 1, .., k-1`. Distinct inputs map to distinct indices, so the first `k`
//! outputs are `k` distinct subnets, and the whole sequence is reproducible
//! from `(seed, prefix)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::prefix::Ipv6Prefix;

const ROUNDS: usize = 4;

#[derive(Debug, Clone)]
pub(crate) struct IndexPermutation {
    bits: u32,
    mask: u64,
    keys: [(u64, u64); ROUNDS],
}

impl IndexPermutation {
    /// Permutation of `[0, 2^bits)` keyed by the seed and the prefix.
    pub(crate) fn new(bits: u32, seed: u64, prefix: &Ipv6Prefix) -> Self {
        assert!(bits <= 64);
        let mut material = [0u8; 32];
        material[..8].copy_from_slice(&seed.to_le_bytes());
        material[8..24].copy_from_slice(&prefix.bits().to_le_bytes());
        material[24] = prefix.len();
        let mut rng = ChaCha8Rng::from_seed(material);
        let mut keys = [(0u64, 0u64); ROUNDS];
        for k in keys.iter_mut() {
            *k = (rng.next_u64(), rng.next_u64() | 1);
        }
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        Self { bits, mask, keys }
    }

    #[inline]
    pub(crate) fn apply(&self, mut x: u64) -> u64 {
        if self.bits == 0 {
            return 0;
        }
        let shift = self.bits.div_ceil(2);
        for &(xor, mul) in &self.keys {
            // each step is invertible modulo 2^bits
            x = (x ^ xor) & self.mask;
            x = x.wrapping_mul(mul) & self.mask;
            x ^= x >> shift;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn is_a_bijection_on_small_domains() {
        let p = Ipv6Prefix::truncate(0x2001_0db8 << 96, 48);
        for bits in 0..=14 {
            let perm = IndexPermutation::new(bits, 7, &p);
            let n = 1u64 << bits;
            let image: HashSet<u64> = (0..n).map(|i| perm.apply(i)).collect();
            assert_eq!(image.len() as u64, n, "bits={bits}");
            assert!(image.iter().all(|&v| v < n));
        }
    }

    #[test]
    fn depends_on_seed() {
        let p = Ipv6Prefix::truncate(0x2001_0db8 << 96, 48);
        let a: Vec<u64> = (0..16).map(|i| IndexPermutation::new(16, 1, &p).apply(i)).collect();
        let b: Vec<u64> = (0..16).map(|i| IndexPermutation::new(16, 2, &p).apply(i)).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn full_width_domain() {
        let perm = IndexPermutation::new(64, 3, &Ipv6Prefix::ANY);
        let image: HashSet<u64> = (0..10_000).map(|i| perm.apply(i)).collect();
        assert_eq!(image.len(), 10_000);
    }
}
