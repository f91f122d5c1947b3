//! Counter-based seed streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream addressed by
//! `(seed, stream)`, so trial `t` of a sweep sees the same randomness no
//! matter which worker thread executes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent random inputs of one retrieval.
pub mod tag {
    pub const STORE: u64 = 1;
    pub const FADING: u64 = 2;
    pub const QUERIES: u64 = 3;
    pub const DITHERS: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const CODE: u64 = 6;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed of child `index` from `seed` (splitmix64 finalizer).
pub fn child(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
