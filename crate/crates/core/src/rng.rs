use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Portable seeded generator used everywhere randomness is needed.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` child seeds drawn from a generator seeded with `master`.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = seeded(master);
    (0..n).map(|_| rng.next_u64()).collect()
}
