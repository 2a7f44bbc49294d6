//! Seed derivation: every random draw comes from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a generator is used for; keeps independent draws on separate streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Truth = 1,
    InitialEnsemble = 2,
    ModelNoise = 3,
    ObservationNoise = 4,
    SubsetChoice = 5,
    PerturbedObs = 6,
}

/// Generator for `(purpose, cycle, member)` derived from the master seed.
///
/// The result does not depend on how many generators were created before it,
/// which keeps parallel runs independent of scheduling and thread count.
pub fn stream(master: u64, purpose: Purpose, cycle: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let id = ((purpose as u64) << 56) ^ (cycle << 20) ^ member;
    rng.set_stream(id);
    rng
}
