//! Named, independent random streams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream names used across the toolkit.
pub mod streams {
    pub const INIT: &str = "init";
    pub const SAMPLER: &str = "sampler";
    pub const NEGATIVES: &str = "negatives";
    pub const BATCHES: &str = "batches";
    pub const SPLITS: &str = "splits";
    pub const RANDOM_SAMPLING: &str = "random-sampling";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed for `name` from `seed`. Stable across platforms.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

pub fn stream(seed: u64, name: &str) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, name))
}

/// Stream for `name` further indexed by e.g. epoch.
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(derive_seed(seed, name) ^ splitmix64(index)))
}
