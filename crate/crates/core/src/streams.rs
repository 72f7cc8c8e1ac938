//! Named deterministic random streams.
//!
//! Every source of randomness in the workbench is a ChaCha stream derived
//! from a base seed, a purpose label, and an index. Streams for different
//! purposes never overlap, and adding a new consumer (another method, more
//! episodes) never perturbs the draws of an existing one.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the label bytes, folded with the base seed and index through
/// SplitMix64. Stable across platforms and releases.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    splitmix64(splitmix64(base ^ h).wrapping_add(index))
}

/// A seeded stream for one named purpose.
pub fn stream(base: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, label, index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
