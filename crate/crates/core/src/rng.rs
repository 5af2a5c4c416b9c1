//! Reproducible random streams.
//!
//! Every Monte Carlo consumer derives its generator from a base seed plus a
//! path of stream identifiers (experiment, drop, cell, ...). The generator is
//! ChaCha8, whose 64-bit stream selector gives independent sequences for the
//! same key, so work can be split across threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags used by the crate, kept distinct so sub-streams never collide.
pub mod tag {
    pub const EMBB_FADING: u64 = 0x656d_6262;
    pub const URLLC_FADING: u64 = 0x7572_6c6c;
    pub const TABLE_CELL: u64 = 0x7461_626c;
    pub const CRN: u64 = 0x6372_6e00;
    pub const EVIDENCE: u64 = 0x6576_6964;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a base seed and a path of identifiers into one 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &id| splitmix64(acc ^ splitmix64(id)))
}

/// Generator for a plain seed.
pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for the sub-stream identified by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive_seed(seed, path));
    rng
}
