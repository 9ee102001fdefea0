// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seed derivation.
//!
//! Every random object in the crate is a pure function of a `u64` seed. Child
//! seeds are derived with a splitmix64 finaliser so that example `k` of a
//! dataset can be regenerated without drawing examples `0..k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type CpdRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `index` under `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Derives a seed for a named purpose (e.g. "train", "test", "shuffle").
pub fn tagged_seed(parent: u64, tag: &str) -> u64 {
    // FNV-1a over the tag; stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    child_seed(parent, h)
}

pub fn rng_from_seed(seed: u64) -> CpdRng {
    ChaCha8Rng::seed_from_u64(seed)
}
