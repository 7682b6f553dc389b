//! Derived seeds. Every stochastic stage takes a single base seed and derives
//! its own stream from it, so pairwise jobs can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a base seed with a path of indices (splitmix64 finalizer per step).
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(base.wrapping_add(GOLDEN)), |acc, &p| mix(acc ^ mix(p.wrapping_add(GOLDEN))))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the unordered pair `(i, j)`; symmetric in its arguments.
pub fn pair(base: u64, i: usize, j: usize) -> u64 {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    derive(base, &[lo as u64, hi as u64])
}
