//! Seeded random streams.
//!
//! Every random draw in an episode comes from a ChaCha8 stream identified by
//! `(seed, stream id)`; the word position inside the stream is the counter.
//! Separate streams keep the adversary, the channel and the learner from
//! perturbing each other when one of them changes how many numbers it draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const ADVERSARY_STREAM: u64 = 1;
pub const CHANNEL_STREAM: u64 = 2;
pub const LEARNER_STREAM: u64 = 3;
pub const TARGET_STREAM: u64 = 4;
pub const FIXTURE_STREAM: u64 = 5;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Child stream for batch `index` of a computation that consumed `parent`.
pub fn child(parent: &mut dyn RngCore, index: u64) -> StreamRng {
    let seed = parent.next_u64();
    stream(seed, index)
}
