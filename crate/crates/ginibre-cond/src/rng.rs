//! Deterministic random-number streams.
//!
//! Every stochastic routine draws from a ChaCha8 generator derived from a
//! single `u64` master seed plus a stream name, so that independent parts of
//! a run (sampling, Monte Carlo trials, perturbations) consume disjoint
//! streams and every result is reproducible bit-for-bit from the seed alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a hash of a byte string; stable across platforms and versions.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// A ChaCha8 generator seeded by the master seed, on the stream addressed by
/// `(name, index)`. Distinct names or indices give independent streams.
pub fn derived_stream(master_seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a(name.as_bytes()).wrapping_add(index));
    rng
}
