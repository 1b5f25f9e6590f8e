//! Seed handling.
//!
//! All randomness is drawn from ChaCha20 streams. A master seed picks the
//! key and a stream id separates independent consumers, so trial `i` of a
//! campaign never shares a keystream with trial `j`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded generator on stream 0.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    stream_rng(seed, 0)
}

/// Derive a child seed from a parent seed and a label (splitmix64 finalizer).
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(label.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
