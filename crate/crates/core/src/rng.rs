//! Seed plumbing.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by a
//! 64-bit seed. Independent consumers of the same run seed (the Hessian
//! sampler at iteration `t`, the gradient sampler at iteration `t`, ...)
//! get their own seed through [`derive_seed`], a SplitMix64 mix of
//! `(seed, purpose, index)`. Results are therefore a pure function of the
//! seed, independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for [`derive_seed`].
pub mod purpose {
    pub const HESSIAN: u64 = 0x4845_5353;
    pub const GRADIENT: u64 = 0x4752_4144;
    pub const SKETCH: u64 = 0x534b_4554;
    pub const DATA: u64 = 0x4441_5441;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const START: u64 = 0x5354_5254;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(purpose, index)` under `seed`.
pub fn derive_seed(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ purpose) ^ index)
}

/// The generator used for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
