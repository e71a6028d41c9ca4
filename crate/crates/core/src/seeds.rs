//! Deterministic seed derivation for parallel work items.
//!
//! Every stochastic task derives its own stream seed from the run seed plus a
//! structural path (fold, epoch, batch, slot, ...). Results are then identical
//! regardless of thread count or scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step; a cheap, well-mixed 64-bit hash.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a structural path.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(base ^ 0x6c62_272e_07bb_0142);
    for &part in path {
        state = splitmix64(state ^ part);
    }
    state
}

/// A seeded stream for the given structural path.
pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, path))
}
