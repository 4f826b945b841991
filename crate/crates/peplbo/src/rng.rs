//! Seed derivation and seeded RNG construction.
//!
//! All stochastic code in the crate draws from ChaCha8 streams whose seeds
//! are derived from a master seed, a purpose tag and an index. Derivation
//! uses SplitMix64-style mixing over FNV-hashed tags, so the streams are
//! stable across platforms and releases.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice. Used for tag hashing and n-gram bucketing.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a purpose tag and an index.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix(master ^ fnv1a(tag.as_bytes()).rotate_left(17) ^ splitmix(index))
}

/// Seeded ChaCha8 stream.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
