use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Portable deterministic generator.
pub type DeterministicGenerator = ChaCha20Rng;

/// Stream keyed by `(seed, label)`: SHA-256 of the little-endian seed and the
/// label bytes seeds a ChaCha20 generator.
pub fn seeded_rng(seed: u64, stream_label: &str) -> DeterministicGenerator {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream_label.as_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(seed: u64, label: &str) -> Vec<u64> {
        let mut r = seeded_rng(seed, label);
        (0..1000).map(|_| r.gen()).collect()
    }

    #[test]
    fn identical_streams_repeat() {
        assert_eq!(draws(42, "bits"), draws(42, "bits"));
    }

    #[test]
    fn labels_and_seeds_separate() {
        assert_ne!(draws(42, "bits"), draws(42, "noise"));
        assert_ne!(draws(42, "bits"), draws(43, "bits"));
    }

    #[test]
    fn first_draw_is_pinned() {
        // Frozen value: guards against silent changes to the derivation.
        let v: u64 = seeded_rng(42, "bits").gen();
        assert_eq!(v, FROZEN_FIRST_DRAW);
    }

    const FROZEN_FIRST_DRAW: u64 = 1_552_562_934_666_868_115;
}
