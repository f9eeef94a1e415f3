//! Seed expansion. Every random stream of a run derives from one integer seed:
//!
//! `sub_seed(seed, stream) = splitmix64(seed ^ splitmix64(stream))`
//!
//! using the reference splitmix64 finalizer with wrapping 64-bit arithmetic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_WORKLOAD: u64 = 1;
pub const STREAM_SCALING: u64 = 2;
pub const STREAM_METRICS: u64 = 3;
pub const STREAM_PROFILING: u64 = 4;
pub const STREAM_CV: u64 = 5;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, stream))
}
