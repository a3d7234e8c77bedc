//! Seed derivation.
//!
//! Every random stream in the crate comes from a root `u64` seed. Independent
//! child streams (per hypothesis, per chunk, per sweep point) are obtained with
//! [`derive_seed`], which mixes the parent seed with a stream index through the
//! SplitMix64 finalizer:
//!
//! ```text
//! child = splitmix64(parent ^ splitmix64(index + 0x9E3779B97F4A7C15))
//! ```
//!
//! The mapping is fixed so that results are reproducible across runs, thread
//! counts and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Child seed for stream `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
