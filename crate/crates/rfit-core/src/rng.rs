//! Seedable, cross-platform random streams.
//!
//! All randomness in this crate flows from a single `u64` seed through two
//! helpers:
//!
//! * [`stream_rng`] — ChaCha8 keyed by the seed, with the ChaCha stream
//!   counter selecting an independent substream. Tree `b` of a forest uses
//!   stream `b`, so parallel and serial fits consume identical bits.
//! * [`derive_seed`] — a SplitMix64 hash for deriving unrelated child seeds
//!   (one per simulation replicate, one per fitted forest, ...).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent substream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 step, used to derive child seeds that do not collide with
/// the parent's ChaCha streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
