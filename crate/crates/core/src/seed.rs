//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by `(master, stream, index)` and
//! mixed through the SplitMix64 finalizer, so the draws a subject or a
//! replication receives do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct tags keep the sub-streams of one master seed apart.
pub mod stream {
    pub const EFFECTS: u64 = 0x45ff_ec75;
    pub const BROWNIAN: u64 = 0xb209_1a11;
    pub const FRACTIONAL: u64 = 0xf9ac_7104;
    pub const REPLICATION: u64 = 0x9e91_1ca7;
    pub const CROSS_VALIDATION: u64 = 0xc0a5_5fa1;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}
