//! Seed derivation so every stochastic step draws from its own stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed, a purpose tag and an index.
pub fn derive(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(base);
    for byte in tag.bytes() {
        h = mix(h ^ u64::from(byte));
    }
    mix(h ^ index)
}

pub fn rng(base: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag, index))
}
