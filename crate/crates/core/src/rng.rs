//! Seeded random streams.
//!
//! Every stochastic step of a run draws from its own ChaCha stream derived
//! from the run seed, so adding draws in one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    SomInit = 1,
    SomOrder = 2,
    CompressionInit = 3,
    EstimationInit = 4,
    Dropout = 5,
    BatchOrder = 6,
    Split = 7,
    Contamination = 8,
    Subsample = 9,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
