//! Deterministic seed derivation.
//!
//! Every randomized operation constructs its own generator from a seed path
//! like `[master, record_id, purpose]`; there is no global RNG state, so
//! identical inputs always replay identically regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Mix an ordered list of seed components into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x5157E9B1A35F92D4u64;
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// A ChaCha8 generator seeded from the mixed parts.
pub fn rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}
