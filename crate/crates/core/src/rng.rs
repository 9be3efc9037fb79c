//! Seed-deterministic random streams.
//!
//! A single master seed fans out to independent sub-streams so that
//! simulator components and statistical tests draw from non-overlapping
//! sequences while staying bit-reproducible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derive the sub-stream `stream` of the generator seeded by `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}
