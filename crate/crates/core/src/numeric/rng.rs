use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded generator used by every stochastic routine in the crate.
pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
///
/// Streams with distinct ids never overlap, so subsystems (initialization,
/// shuffling, subsampling, ...) can draw without perturbing each other.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Split a child generator off `rng`.
pub fn split(rng: &mut Rng) -> Rng {
    let seed = rng.next_u64();
    let id = rng.next_u64();
    stream(seed, id)
}
