//! Seeded, splittable randomness.
//!
//! Everything randomized in this crate is driven by a counter-based stream
//! cipher generator addressed by an explicit 64-bit seed. Parallel loops
//! derive one independent substream per work item, so results do not depend
//! on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

/// Generator for the given seed.
pub fn from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator for `seed`.
///
/// Distinct streams of the same seed never share output, which makes
/// per-trial generators safe to hand out to parallel workers.
pub fn substream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniformly random permutation of `0..len` by Fisher-Yates.
pub fn random_permutation(len: usize, rng: &mut SeededRng) -> Vec<usize> {
    use rand::Rng;
    let mut p: Vec<usize> = (0..len).collect();
    for i in (1..len).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}
