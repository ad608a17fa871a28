//! Seed plumbing: every random choice in the pipeline flows from one root
//! seed through named substreams, so individual components (split, init,
//! shuffle, dropout, run index) can be perturbed independently without
//! disturbing the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on u64, used both to derive substream
/// seeds and as the counter-based generator behind dropout masks.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed and a stream label.
///
/// Labels are FNV-1a hashed so `substream(s, "init")` and
/// `substream(s, "shuffle")` are unrelated streams of the same root.
pub fn substream(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(root ^ h)
}

/// Derive an indexed child seed (e.g. per-run or per-epoch streams).
pub fn substream_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(substream(root, label).wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Seeded stream generator for sampling-heavy paths (corpus synthesis,
/// splits, weight init, epoch shuffles).
pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stateless counter-based generator. Each `(seed, counter)` pair maps to a
/// fixed value, so consumers like dropout can draw mask bits keyed by
/// position without sharing mutable RNG state across threads.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(counter))
    }

    /// Uniform draw in [0, 1) at the given counter.
    #[inline]
    pub fn unit_f64_at(&self, counter: u64) -> f64 {
        // 53 high bits give a uniform double in [0, 1).
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
