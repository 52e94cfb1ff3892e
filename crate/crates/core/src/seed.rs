//! Seed derivation.
//!
//! Every random quantity in the crate is drawn from a `ChaCha8Rng` seeded with
//! a 64-bit value. Seeds are never shared between streams; they are derived
//! from a parent seed with the splitmix64 finalizer:
//!
//! ```text
//! mix(z):
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (wrapping)
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB   (wrapping)
//!     return z ^ (z >> 31)
//!
//! replication_seed(base, r) = mix(base XOR r)
//! substream(seed, tag)      = mix(seed + (tag + 1) * 0x9E3779B97F4A7C15)   (wrapping)
//! ```
//!
//! `mix` is a bijection on `u64`, so distinct replication indices always get
//! distinct seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` in an experiment started from `base`.
pub fn replication_seed(base: u64, rep: u64) -> u64 {
    mix64(base ^ rep)
}

/// Independent child stream `tag` of `seed`.
pub fn substream(seed: u64, tag: u64) -> u64 {
    mix64(seed.wrapping_add(tag.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags used inside one replication.
pub(crate) const TAG_SIGNAL: u64 = 0;
pub(crate) const TAG_SAMPLE: u64 = 1;
pub(crate) const TAG_SPLIT: u64 = 2;
pub(crate) const TAG_DESIGN: u64 = 10;
pub(crate) const TAG_NOISE: u64 = 11;
