//! Deterministic random substreams.
//!
//! Every stochastic unit of work (one simulation iteration, one Monte Carlo
//! replicate, one study inside a replicate) gets its own generator whose state
//! is a pure function of the run seed and the unit's index path. Work can then
//! be scheduled on any number of threads without changing a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels separating the independent purposes a replicate draws for.
pub mod lane {
    pub const STUDY_PARAMS: u64 = 0x5354_5544_5950_4152;
    pub const ORIGINAL_DATA: u64 = 0x4f52_4947_4441_5441;
    pub const SIM_ESTIMATOR: u64 = 0x5349_4d45_5354_494d;
    pub const RETRY: u64 = 0x5245_5452_5900_0000;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from a root seed and a path of indices.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0xD134_2543_DE82_EF95)))
    })
}

/// Generator for the substream at `path` under `seed`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_key(seed, path))
}
