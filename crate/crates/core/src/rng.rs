//! Seed derivation. A run seed feeds several independent ChaCha streams:
//! one per node for path sampling and one each for splitting, parameter
//! initialization and dropout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SPLIT_STREAM: u64 = u64::MAX;
pub const INIT_STREAM: u64 = u64::MAX - 1;
pub const DROPOUT_STREAM: u64 = u64::MAX - 2;
pub const GENERATOR_STREAM: u64 = u64::MAX - 3;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
