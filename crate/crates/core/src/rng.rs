//! Seeded, splittable randomness.
//!
//! Every randomized operation in this crate takes an explicit 64-bit seed and
//! derives independent sub-streams with [`split`], so results are reproducible
//! regardless of evaluation order or degree of parallelism.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for the primary stream of a seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sub-stream `stream` of a seed.
pub fn split(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
