//! Seeded random streams.
//!
//! Every random decision in the crate is drawn from a ChaCha stream keyed by
//! a root seed and a named substream, so that sampling, negative draws,
//! initialization and shuffling can each be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named substreams of a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Sampler,
    Negatives,
    Init,
    Shuffle,
    Split,
    Eval,
    Dropout,
    Check,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Sampler => 1,
            Stream::Negatives => 2,
            Stream::Init => 3,
            Stream::Shuffle => 4,
            Stream::Split => 5,
            Stream::Eval => 6,
            Stream::Dropout => 7,
            Stream::Check => 8,
        }
    }
}

/// Stream for `(seed, stream)`.
pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

/// Stream for `(seed, stream, key)`; used for per-query and per-epoch draws.
pub fn keyed_stream(seed: u64, which: Stream, key: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, key));
    rng.set_stream(which.id());
    rng
}

/// Key for an ordered node pair.
pub fn pair_key(u: usize, v: usize) -> u64 {
    mix(u as u64, (v as u64).wrapping_add(0x9E37_79B9_7F4A_7C15))
}

// splitmix64 finalizer over a combined word
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ b.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
