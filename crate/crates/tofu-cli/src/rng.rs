//! Deterministic stream splitting for everything random in the pipeline.
//!
//! Each stochastic choice draws from a ChaCha stream keyed by the user
//! seed, a fixed domain tag and an index (frame, epoch or step), so outputs
//! are a pure function of the command line and independent of thread count
//! and completion order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Randomness domains. The numeric tags are part of the dataset format:
/// changing them changes every generated corpus.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    Scene = 1,
    Noise = 2,
    Shuffle = 3,
    Augment = 4,
    Init = 5,
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix(mix(seed ^ (domain as u64).wrapping_mul(0xd6e8_feb8_6659_fd93)) ^ index)
}

pub fn stream_rng(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, domain, index))
}
