//! Deterministic random streams.
//!
//! Every replicate in a calibration or power study gets its own stream,
//! derived from the master seed and a `(purpose, index)` pair. Parallel and
//! serial runs therefore draw identical numbers for identical replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream in the crate.
pub type Stream = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    BasisSample = 1,
    StageOne = 2,
    StageTwo = 3,
    Replicate = 4,
    Baseline = 5,
    Bootstrap = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a purpose and a two-level index into a stream seed.
pub fn derive_seed(master: u64, purpose: Purpose, major: u64, minor: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ (purpose as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    h = splitmix64(h ^ major.wrapping_mul(0xe703_7ed1_a0b4_28db));
    splitmix64(h ^ minor.wrapping_mul(0x8ebc_6af0_9c88_c6e3))
}

pub fn stream(master: u64, purpose: Purpose, major: u64, minor: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(master, purpose, major, minor))
}
