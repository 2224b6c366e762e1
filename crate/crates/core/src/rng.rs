//! Deterministic seed derivation.
//!
//! Every stochastic stage of a run (population sampling, episode
//! initialization, validation draws) gets its own ChaCha stream whose seed is
//! a pure function of the run seed and a structural path. Reruns and resumed
//! runs therefore see bit-identical randomness regardless of scheduling.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 finalizer; a stable, well-mixed 64-bit hash step.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a structural path.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut h = mix(root);
    for &p in path {
        h = mix(h ^ p);
    }
    h
}

/// ChaCha stream for a derived seed.
pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

/// Stream tags keeping the per-purpose seed paths disjoint.
pub mod tag {
    pub const SAMPLE: u64 = 1;
    pub const EPISODE: u64 = 2;
    pub const VALIDATE: u64 = 3;
    pub const TEST_GRID: u64 = 4;
    pub const SWEEP: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_path_sensitive() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[2]));
        assert_ne!(derive_seed(1, &[]), derive_seed(1, &[0]));
    }
}
