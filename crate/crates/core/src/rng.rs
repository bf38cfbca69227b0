//! Counter-based deterministic RNG with labelled substreams.
//!
//! A run seed never feeds one shared generator: each consumer derives its own
//! stream from `(seed, label)` so that, e.g., drawing the probe set cannot
//! perturb the batch order. The generator is SplitMix64: a 64-bit counter
//! pushed through a finalizer, which makes state snapshot/restore trivial for
//! checkpointing.

use crate::math;
use alloc::vec::Vec;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Deterministic stream of pseudo-random values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
    spare_normal: Option<u64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            state: mix64(seed ^ GAMMA),
            spare_normal: None,
        }
    }

    /// Stream derived from `(seed, label)`; distinct labels give independent
    /// streams for the same seed.
    pub fn substream(seed: u64, label: &str) -> Self {
        Rng {
            state: mix64(mix64(seed ^ GAMMA) ^ fnv1a(label)),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal via Box–Muller; the paired draw is cached.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(bits) = self.spare_normal.take() {
            return f64::from_bits(bits);
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * math::PI * u2;
        self.spare_normal = Some((r * math::sin(theta)).to_bits());
        r * math::cos(theta)
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        let n = xs.len();
        for i in (1..n).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// `k` distinct indices drawn without replacement from `0..n`.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_indices: k > n");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    /// Snapshot for checkpointing. `spare` is the cached Box–Muller half.
    pub fn state(&self) -> (u64, Option<u64>) {
        (self.state, self.spare_normal)
    }

    pub fn from_state(state: u64, spare: Option<u64>) -> Self {
        Rng {
            state,
            spare_normal: spare,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_are_independent_of_each_other() {
        let mut split = Rng::substream(3, "split");
        let mut init = Rng::substream(3, "init");
        let a: Vec<u64> = (0..8).map(|_| split.next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|_| init.next_u64()).collect();
        assert_ne!(a, b);
        // Consuming one stream must not affect the other.
        let mut split2 = Rng::substream(3, "split");
        let a2: Vec<u64> = (0..8).map(|_| split2.next_u64()).collect();
        assert_eq!(a, a2);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Rng::new(11);
        for _ in 0..10_000 {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn next_below_unbiased_range() {
        let mut r = Rng::new(5);
        let mut counts = [0u32; 7];
        for _ in 0..70_000 {
            counts[r.next_below(7) as usize] += 1;
        }
        for &c in &counts {
            assert!((8_000..12_000).contains(&c), "count {c} far from uniform");
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut r = Rng::new(13);
        let n = 50_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = r.next_normal();
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Rng::new(2);
        let mut xs: Vec<usize> = (0..100).collect();
        r.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn sample_indices_distinct_and_in_range() {
        let mut r = Rng::new(9);
        let idx = r.sample_indices(600, 512);
        assert_eq!(idx.len(), 512);
        let mut seen = alloc::collections::BTreeSet::new();
        for &i in &idx {
            assert!(i < 600);
            assert!(seen.insert(i), "duplicate index {i}");
        }
    }

    #[test]
    fn state_roundtrip_resumes_stream() {
        let mut r = Rng::new(21);
        for _ in 0..5 {
            r.next_normal();
        }
        let (s, spare) = r.state();
        let mut r2 = Rng::from_state(s, spare);
        for _ in 0..10 {
            assert_eq!(r.next_normal().to_bits(), r2.next_normal().to_bits());
        }
    }
}
