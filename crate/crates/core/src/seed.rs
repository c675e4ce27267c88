//! Seed streams.
//!
//! Every random draw in the toolkit comes from one root seed. Each purpose
//! (splitting, initialization, synthetic generation) reads its own ChaCha
//! stream so that, for example, changing the model variant never changes the
//! train/test partition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    Init = 2,
    Synthetic = 3,
}

/// Deterministic generator for `(seed, purpose, index)`.
pub fn rng_for(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) | (index & ((1 << 40) - 1)));
    rng
}
