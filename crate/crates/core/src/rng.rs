//! Deterministic randomness helpers.
//!
//! Graph sampling must be reproducible and order-independent: graph `t` of a
//! collection is identical whether graphs are sampled sequentially or in
//! parallel. We get this by deriving every stream from a counter-based mix of
//! `(seed, graph index, ...)` rather than by advancing one shared generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer: a well-distributed 64-bit mixing function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of counters into a single word.
pub(crate) fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3; // pi digits, an arbitrary non-zero start
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// Uniform value in [0, 1) from a mixed word (53-bit mantissa path).
pub(crate) fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based uniform in [0, 1): same inputs always give the same value.
pub(crate) fn keyed_unit(parts: &[u64]) -> f64 {
    unit_f64(splitmix64(mix(parts)))
}

/// Stream generator keyed by counters, for longer per-graph draws.
pub(crate) fn stream(parts: &[u64]) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    let base = mix(parts);
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(base.wrapping_add(i as u64 + 1)).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
