//! Seeded random streams and Laplace sampling.
//!
//! Every random draw in the crate flows through an [`RngStream`]: a ChaCha20
//! generator keyed by `(seed, party id, purpose tag)`. Identical seeds produce
//! identical draw sequences on every platform, which is what makes protocol
//! runs, noise draws, and transcripts replayable.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Party identifier for stream derivation.
pub const PARTY_BOB: u8 = 0;
/// Party identifier for stream derivation.
pub const PARTY_ALICE: u8 = 1;
/// Stream owner for harness-level draws (data synthesis, splits).
pub const PARTY_HARNESS: u8 = 2;

/// A deterministic random stream.
///
/// Algorithm: ChaCha20, keyed by `SHA-256(seed_le ‖ party ‖ tag)`. Streams are
/// single-owner: one per party per purpose, never shared between tasks.
pub struct RngStream {
    seed: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    /// Root stream for a bare seed (party = harness, tag = "root").
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, PARTY_HARNESS, "root")
    }

    /// Derive the stream owned by `party` for the purpose named by `tag`.
    pub fn derive(seed: u64, party: u8, tag: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update([party]);
        hasher.update(tag.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RngStream {
            seed,
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw strictly inside (0, 1).
    ///
    /// Uses the 53-bit mantissa grid offset by half a step, so neither
    /// endpoint is reachable and `ln` never sees 0.
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform01(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound).
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Rejection sampling over the top multiple of `bound`.
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.inner.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Standard normal draw (Box-Muller).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform_open01();
        let u2 = self.uniform_open01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Sample `k` distinct indices from `0..n` (partial Fisher-Yates),
    /// returned in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<u32> {
        debug_assert!(k <= n);
        let mut pool: Vec<u32> = (0..n as u32).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Inverse-CDF map from a uniform draw `u` in (0,1) to Laplace(0, scale).
pub fn laplace_from_uniform(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One draw from Laplace(0, `scale`).
pub fn sample_laplace(scale: f64, rng: &mut RngStream) -> Result<f64> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::domain(format!(
            "laplace scale must be positive, got {scale}"
        )));
    }
    Ok(laplace_from_uniform(rng.uniform_open01(), scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seeds_identical_sequences() {
        let mut a = RngStream::derive(42, PARTY_BOB, "noise");
        let mut b = RngStream::derive(42, PARTY_BOB, "noise");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_parties_distinct_streams() {
        let mut a = RngStream::derive(42, PARTY_BOB, "noise");
        let mut b = RngStream::derive(42, PARTY_ALICE, "noise");
        let draws_a: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let draws_b: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(draws_a, draws_b);
    }

    #[test]
    fn laplace_median_uniform_gives_zero() {
        assert_eq!(laplace_from_uniform(0.5, 2.0), 0.0);
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut rng = RngStream::new(1);
        assert!(sample_laplace(0.0, &mut rng).is_err());
        assert!(sample_laplace(-1.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_moments_match_distribution() {
        // Statistical oracle: mean 0 +/- 0.01 and Var = 2b^2 +/- 2% at 1e6 draws.
        let mut rng = RngStream::derive(7, PARTY_HARNESS, "laplace-test");
        let n = 1_000_000usize;
        let scale = 2.0;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sample_laplace(scale, &mut rng).unwrap();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        let expected = 2.0 * scale * scale;
        assert!(
            (var - expected).abs() / expected < 0.02,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn laplace_median_absolute_deviation() {
        // P(|X| <= b ln 2) = 1/2 for Laplace(0, b).
        let mut rng = RngStream::derive(9, PARTY_HARNESS, "laplace-mad");
        let n = 1_000_000usize;
        let scale = 1.7;
        let cutoff = scale * std::f64::consts::LN_2;
        let mut hits = 0usize;
        for _ in 0..n {
            if sample_laplace(scale, &mut rng).unwrap().abs() <= cutoff {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.005, "median check {frac}");
    }

    #[test]
    fn sample_indices_distinct_and_in_range() {
        let mut rng = RngStream::new(3);
        let picked = rng.sample_indices(50, 16);
        assert_eq!(picked.len(), 16);
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
        assert!(picked.iter().all(|&i| i < 50));
    }
}
