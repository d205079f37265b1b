//! Seeded random sources.
//!
//! Every algorithm takes `&mut impl Rng`; this module only fixes which
//! generator the runner and tests use so results are reproducible across
//! platforms. ChaCha8 supports independent streams, so a worker or repeat
//! index selects a stream without reseeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SearchRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SearchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` under `seed`; streams never overlap.
pub fn stream(seed: u64, stream: u64) -> SearchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
