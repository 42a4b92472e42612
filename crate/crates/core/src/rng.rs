//! Deterministic seeding.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a master
//! seed and a short path of integer labels, so that results depend only on
//! (seed, label path) and never on scheduling or iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a label path.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(seed: u64, labels: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, labels))
}

/// Generator keyed directly by `seed`, for callers that already hold a
/// derived per-item seed.
pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
