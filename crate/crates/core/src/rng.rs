//! Per-trajectory random streams.
//!
//! Every work unit (trajectory, ensemble member, validation point) draws from
//! its own ChaCha8 stream keyed by `(master seed, index)`. ChaCha is a
//! counter-based generator, so stream `i` is the same no matter which thread
//! consumes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `index` of the master `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
