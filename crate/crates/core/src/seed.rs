//! Seed splitting.
//!
//! Every random consumer draws from its own ChaCha8 stream whose seed is
//! `splitmix64(root ^ fnv1a64(label))`. Streams are keyed by a stable label
//! (for example `"train/shuffle"` or `"sim/target/noise"`), so adding a new
//! consumer never shifts the numbers seen by an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of the stream named `label` under `root`.
pub fn derive(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a64(label.as_bytes()))
}

/// A deterministic generator for the stream named `label` under `root`.
pub fn stream(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label))
}
