//! Counter-based, splittable random streams.
//!
//! A master seed plus a stream index identifies an independent ChaCha
//! stream. Parallel work is split into fixed chunks, chunk `j` draws from
//! stream `j`, so results never depend on how chunks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Samples drawn per chunk in parallel Monte Carlo loops.
pub const CHUNK: usize = 1 << 15;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `count` into `(stream, len)` chunks of at most [`CHUNK`].
pub fn chunks(count: usize) -> Vec<(u64, usize)> {
    (0..count.div_ceil(CHUNK))
        .map(|j| (j as u64, CHUNK.min(count - j * CHUNK)))
        .collect()
}
