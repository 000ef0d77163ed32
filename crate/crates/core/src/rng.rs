//! Deterministic seed splitting.
//!
//! Shot streams are cut into fixed-size chunks; chunk `k` of a stream with
//! seed `s` draws from ChaCha8 seeded with `s` on stream `k`. Serial and
//! parallel runs therefore consume identical random numbers per shot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shots per independently seeded chunk.
pub const SHOT_CHUNK: usize = 1 << 16;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag path.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(parent), |acc, &t| mix64(acc ^ mix64(t)))
}

pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// `(chunk index, shot range)` covering `n` shots.
pub fn chunks(n: usize) -> impl Iterator<Item = (usize, std::ops::Range<usize>)> {
    (0..n.div_ceil(SHOT_CHUNK)).map(move |k| (k, k * SHOT_CHUNK..((k + 1) * SHOT_CHUNK).min(n)))
}
