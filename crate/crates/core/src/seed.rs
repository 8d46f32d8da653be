//! Seed derivation for independent, order-free RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, kept distinct so that no two consumers share a stream.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const HNN_INIT: u64 = 3;
    pub const HNN_TRAIN: u64 = 4;
    pub const PRETRAIN_DATA: u64 = 5;
    pub const AE_INIT: u64 = 6;
    pub const AE_TRAIN: u64 = 7;
    pub const PROJECTION: u64 = 8;
    pub const RANDOM_SCORES: u64 = 9;
    pub const PROBLEM: u64 = 10;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of stream coordinates.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
