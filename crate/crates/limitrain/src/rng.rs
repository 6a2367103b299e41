//! Seeded random-number plumbing.
//!
//! Every stochastic choice in this crate (weight init, batch shuffling,
//! episode sampling, dataset subsampling) draws from a [`ChaCha8Rng`]
//! derived here, so a run is a pure function of its seed regardless of
//! platform or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root generator for a given seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child generator for a named sub-task (`stream`).
///
/// Parallel workers each get their own stream so results do not depend
/// on scheduling order.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
