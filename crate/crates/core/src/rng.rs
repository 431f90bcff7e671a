//! Per-path random streams.
//!
//! Every path gets its own ChaCha8 generator whose 256-bit key is expanded
//! from a 64-bit path seed. The path seed is the `(path_id + 1)`-th output of
//! a SplitMix64 sequence started at the master seed, so it depends only on
//! `(master_seed, path_id)` and never on scheduling or ensemble size.
//!
//! The derivation below is part of the on-disk contract (manifests record
//! [`SEED_ALGORITHM_ID`]); changing it requires a new identifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const SEED_ALGORITHM_ID: &str = "splitmix64-chacha8-ziggurat-v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for path `path_id` under `master_seed`.
pub fn path_seed(master_seed: u64, path_id: u64) -> u64 {
    mix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(path_id.wrapping_add(1))))
}

/// Source of standard normal draws for one path.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn from_path_seed(seed: u64) -> Self {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(i as u64 + 1)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn for_path(master_seed: u64, path_id: u64) -> Self {
        Self::from_path_seed(path_seed(master_seed, path_id))
    }

    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_inputs_same_stream() {
        let mut a = NormalStream::for_path(42, 7);
        let mut b = NormalStream::for_path(42, 7);
        for _ in 0..100 {
            assert_eq!(a.next_normal().to_bits(), b.next_normal().to_bits());
        }
    }

    #[test]
    fn neighbouring_paths_differ() {
        let mut a = NormalStream::for_path(42, 0);
        let mut b = NormalStream::for_path(42, 1);
        let mut c = NormalStream::for_path(43, 0);
        let (x, y, z) = (a.next_normal(), b.next_normal(), c.next_normal());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn path_seed_is_splitmix_sequence() {
        // First SplitMix64 output for state 0 (reference value from the
        // published algorithm).
        assert_eq!(path_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn draws_look_standard_normal() {
        let mut s = NormalStream::for_path(1, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
