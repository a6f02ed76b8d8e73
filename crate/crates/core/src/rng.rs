//! Seeded random streams.
//!
//! Every simulated trial owns a ChaCha8 generator seeded from the run's base
//! seed and selected by stream number = trial index. Streams never overlap,
//! so a trial's draws depend only on `(base_seed, trial_index)` and not on
//! which thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for trial `index` of a run seeded with `base_seed`.
pub fn trial_rng(base_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Derive an independent base seed for a sub-experiment (e.g. one grid point
/// of a sweep) from a parent seed.
pub fn derive_seed(base_seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer over the combined word
    let mut z = base_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
