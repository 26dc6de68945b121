//! Seeded randomness.
//!
//! Every randomized operation takes a [`RandomSeed`] explicitly. Parallel
//! Monte Carlo loops split work into fixed-size chunks and derive one child
//! stream per chunk with [`RandomSeed::derive`], so results depend only on
//! the root seed and never on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Root seed threaded into randomized operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Child seed for stream `index`. Deterministic and collision-resistant
    /// for the small index ranges used here.
    pub fn derive(self, index: u64) -> RandomSeed {
        RandomSeed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }
}

impl From<u64> for RandomSeed {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in [-1, 1) determined by `seed`, the bit patterns of
/// `values` and a class index. Stable across platforms and releases.
pub(crate) fn hash_unit(seed: u64, values: &[f64], class: usize) -> f64 {
    let mut h = splitmix64(seed ^ (class as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for v in values {
        h = splitmix64(h ^ v.to_bits());
    }
    // 53 high bits -> [0,1)
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_seed_same_stream() {
        let (mut r1, mut r2) = (RandomSeed(7).rng(), RandomSeed(7).rng());
        for _ in 0..8 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let root = RandomSeed(42);
        let children: std::collections::HashSet<u64> = (0..1000).map(|i| root.derive(i).0).collect();
        assert_eq!(children.len(), 1000);
        assert_ne!(root.derive(0), RandomSeed(43).derive(0));
    }

    #[test]
    fn hash_unit_range_and_stability() {
        for i in 0..1000 {
            let u = hash_unit(3, &[i as f64, 0.5], i % 4);
            assert!((-1.0..1.0).contains(&u));
        }
        assert_eq!(hash_unit(1, &[0.25], 2), hash_unit(1, &[0.25], 2));
        assert_ne!(hash_unit(1, &[0.25], 2), hash_unit(1, &[0.25], 3));
    }
}
