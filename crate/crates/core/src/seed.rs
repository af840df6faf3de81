//! Seed derivation.
//!
//! All sub-streams are derived with [`mix64`], the SplitMix64 finalizer applied
//! to `base + (stream + 1) * 0x9E37_79B9_7F4A_7C15`. The constants are the
//! published SplitMix64 ones, so derived seeds are identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mixes a base seed with a stream index into a statistically independent seed.
pub fn mix64(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator used everywhere in the crate.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams used inside a single estimator run.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const SECOND_PARTITION: u64 = 2;
    pub const INNER_SPLIT: u64 = 3;
    pub const LEARNER_M: u64 = 0x100;
    pub const LEARNER_G: u64 = 0x200;
}
