//! Deterministic random-number streams. A master seed plus a list of tags
//! (instance index, run index, algorithm id, ...) deterministically derives
//! independent ChaCha streams, so whole experiments replay byte-identically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for combining seed material.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed from which tagged sub-seeds are derived.
#[derive(Debug, Clone, Copy)]
pub struct SeedableStream {
    master: u64,
}

impl SeedableStream {
    pub fn new(master: u64) -> Self {
        SeedableStream { master }
    }

    /// Derives a sub-seed by folding the tags into the master seed.
    pub fn derive(&self, tags: &[u64]) -> u64 {
        let mut state = splitmix64(self.master);
        for &t in tags {
            state = splitmix64(state ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        }
        state
    }
}

pub type Chacha = ChaCha8Rng;

/// A ChaCha generator seeded from a 64-bit seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_tag_sensitive() {
        let s = SeedableStream::new(42);
        assert_eq!(s.derive(&[1, 2]), s.derive(&[1, 2]));
        assert_ne!(s.derive(&[1, 2]), s.derive(&[2, 1]));
        assert_ne!(s.derive(&[0]), s.derive(&[]));
        assert_ne!(SeedableStream::new(1).derive(&[7]), SeedableStream::new(2).derive(&[7]));
    }

    #[test]
    fn streams_replay() {
        let mut a = rng_from(7);
        let mut b = rng_from(7);
        for _ in 0..16 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }
}
