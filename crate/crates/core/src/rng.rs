//! Keyed random streams.
//!
//! Every randomized job (a tree, a trial, a repeat) draws from its own ChaCha
//! stream selected by `(seed, id)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// The stream for job `id` under `seed`.
pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child seed for job `id`, used when a job itself spawns keyed
/// streams (e.g. one forest per repeat).
pub fn derive_seed(seed: u64, id: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(id);
    rng.next_u64()
}
