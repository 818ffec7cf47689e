//! Residue protection mechanisms.
//!
//! Three ways the active party can hide residues before they leave the
//! machine: additive Laplace noise, multiplicative Laplace noise bracketed by
//! two clipping steps, and randomized response over batch indicator bits
//! (used by the hybrid protocol). The first two give the sender epsilon-LDP
//! on each residue per round; randomized response gives epsilon-LDP on each
//! indicator bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_laplace, RngStream};

/// Additive mechanism parameters. Residues live in (-1,1), so the L1
/// sensitivity is 2 and the Laplace scale is `2 / epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AddNoiseParams {
    pub epsilon: f64,
}

impl AddNoiseParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        Ok(AddNoiseParams { epsilon })
    }

    pub fn laplace_scale(&self) -> f64 {
        2.0 / self.epsilon
    }
}

/// How the clipping steps treat values at the bound.
///
/// The sign-preserving variant keeps the residue's sign (which carries the
/// label) while preserving the bound `|1/r| <= 1/b1` the sensitivity argument
/// needs. `UnsignedLiteral` maps clipped values to the bare bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ClipMode {
    #[default]
    SignPreserving,
    UnsignedLiteral,
}

/// Multiplicative mechanism parameters. After the first clip, `1/r` has L1
/// sensitivity `2/b1`, and the noise scale is `2 b2 / (b1 epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultNoiseParams {
    pub epsilon: f64,
    pub b1: f64,
    pub b2: f64,
    pub clip_mode: ClipMode,
}

impl MultNoiseParams {
    pub fn new(epsilon: f64, b1: f64, b2: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        if b1.is_nan() || b1 <= 0.0 || b1 > 1.0 {
            return Err(Error::config("b1 must lie in (0, 1]"));
        }
        if b2.is_nan() || b2 <= 0.0 {
            return Err(Error::config("b2 must be positive"));
        }
        Ok(MultNoiseParams {
            epsilon,
            b1,
            b2,
            clip_mode: ClipMode::default(),
        })
    }

    pub fn with_clip_mode(mut self, mode: ClipMode) -> Self {
        self.clip_mode = mode;
        self
    }

    pub fn laplace_scale(&self) -> f64 {
        2.0 * self.b2 / (self.b1 * self.epsilon)
    }
}

/// Randomized response parameters: each bit is kept with probability
/// `p = e^eps / (1 + e^eps)` and flipped otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RRParams {
    pub epsilon: f64,
}

impl RRParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::config("epsilon must be positive"));
        }
        Ok(RRParams { epsilon })
    }

    /// Keep probability, always in (1/2, 1).
    pub fn keep_probability(&self) -> f64 {
        let e = self.epsilon.exp();
        e / (1.0 + e)
    }
}

/// Additive mechanism: `r + Lap(0, 2/eps)`.
pub fn m_add(r: f64, params: &AddNoiseParams, rng: &mut RngStream) -> f64 {
    r + sample_laplace(params.laplace_scale(), rng).expect("scale is positive by construction")
}

/// First clipping step: push small magnitudes out to `b1` so `|1/r| <= 1/b1`.
pub fn clip1(r: f64, b1: f64, mode: ClipMode) -> f64 {
    if r.abs() <= b1 {
        match mode {
            ClipMode::SignPreserving => {
                if r < 0.0 {
                    -b1
                } else {
                    b1
                }
            }
            ClipMode::UnsignedLiteral => b1,
        }
    } else {
        r
    }
}

/// Second clipping step: cap magnitudes at `b2`.
pub fn clip2(z: f64, b2: f64, mode: ClipMode) -> f64 {
    if z.abs() >= b2 {
        match mode {
            ClipMode::SignPreserving => {
                if z < 0.0 {
                    -b2
                } else {
                    b2
                }
            }
            ClipMode::UnsignedLiteral => b2,
        }
    } else {
        z
    }
}

/// Multiplicative mechanism: `clip2(clip1(r) * Lap(0, 2 b2 / (b1 eps)))`.
///
/// The first clip runs before the multiplication because it establishes the
/// sensitivity that sizes the noise; the second caps the outgoing magnitude.
pub fn m_mult(r: f64, params: &MultNoiseParams, rng: &mut RngStream) -> f64 {
    let clipped = clip1(r, params.b1, params.clip_mode);
    let noise =
        sample_laplace(params.laplace_scale(), rng).expect("scale is positive by construction");
    clip2(clipped * noise, params.b2, params.clip_mode)
}

/// Randomized response over a bit vector: each bit kept with probability `p`,
/// flipped with `1 - p`, independently, in index order.
pub fn random_response(bits: &[bool], params: &RRParams, rng: &mut RngStream) -> Vec<bool> {
    let p = params.keep_probability();
    bits.iter()
        .map(|&b| if rng.uniform01() < p { b } else { !b })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::laplace_from_uniform;

    #[test]
    fn add_scale_from_epsilon() {
        assert_eq!(AddNoiseParams::new(1.0).unwrap().laplace_scale(), 2.0);
        assert_eq!(AddNoiseParams::new(4.0).unwrap().laplace_scale(), 0.5);
        assert!(AddNoiseParams::new(0.0).is_err());
    }

    #[test]
    fn add_zero_noise_is_identity() {
        // Median uniform draw maps to zero noise.
        let noise = laplace_from_uniform(0.5, 2.0);
        assert_eq!(0.3 + noise, 0.3);
    }

    #[test]
    fn add_is_unbiased() {
        let params = AddNoiseParams::new(1.0).unwrap();
        let mut rng = RngStream::new(31);
        let n = 1_000_000usize;
        let r = 0.3;
        let mean: f64 = (0..n).map(|_| m_add(r, &params, &mut rng)).sum::<f64>() / n as f64;
        // 3-sigma band: sd of the mean is sqrt(2 b^2 / n) = sqrt(8)/1000.
        assert!((mean - r).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn clip1_branches() {
        let m = ClipMode::SignPreserving;
        assert_eq!(clip1(0.5, 0.1, m), 0.5);
        assert_eq!(clip1(0.05, 0.1, m), 0.1);
        assert_eq!(clip1(-0.05, 0.1, m), -0.1);
        assert_eq!(clip1(-0.05, 0.1, ClipMode::UnsignedLiteral), 0.1);
        // Sensitivity bound holds in both modes.
        for r in [-0.9, -0.05, 0.0, 0.02, 0.7] {
            for mode in [ClipMode::SignPreserving, ClipMode::UnsignedLiteral] {
                assert!((1.0 / clip1(r, 0.1, mode)).abs() <= 1.0 / 0.1 + 1e-12);
            }
        }
    }

    #[test]
    fn clip2_branches() {
        let m = ClipMode::SignPreserving;
        assert_eq!(clip2(3.0, 10.0, m), 3.0);
        assert_eq!(clip2(15.0, 10.0, m), 10.0);
        assert_eq!(clip2(-15.0, 10.0, m), -10.0);
        assert_eq!(clip2(-15.0, 10.0, ClipMode::UnsignedLiteral), 10.0);
    }

    #[test]
    fn mult_scale_and_identity_noise() {
        let params = MultNoiseParams::new(10.0, 0.1, 10.0).unwrap();
        assert!((params.laplace_scale() - 20.0).abs() < 1e-12);
        // Unit multiplier leaves a clip1-fixed value unchanged.
        let clipped = clip1(0.5, params.b1, params.clip_mode);
        assert_eq!(clip2(clipped * 1.0, params.b2, params.clip_mode), 0.5);
    }

    #[test]
    fn mult_output_bounded_by_b2() {
        let params = MultNoiseParams::new(0.5, 0.1, 10.0).unwrap();
        let mut rng = RngStream::new(32);
        for i in 0..100_000 {
            let r = (i as f64 / 100_000.0) * 1.8 - 0.9;
            let out = m_mult(r, &params, &mut rng);
            assert!(out.abs() <= params.b2, "out {out}");
        }
    }

    #[test]
    fn rr_keep_probability() {
        let p = RRParams::new(3f64.ln()).unwrap().keep_probability();
        assert!((p - 0.75).abs() < 1e-12);
        // p -> 1 keeps everything.
        let params = RRParams::new(40.0).unwrap();
        let mut rng = RngStream::new(33);
        let bits = vec![true, false, true, true, false];
        assert_eq!(random_response(&bits, &params, &mut rng), bits);
    }

    #[test]
    fn rr_flip_rate_matches_parameter() {
        let params = RRParams::new(3f64.ln()).unwrap();
        let mut rng = RngStream::new(34);
        let bits = vec![true; 1_000_000];
        let out = random_response(&bits, &params, &mut rng);
        let flipped = out.iter().filter(|&&b| !b).count();
        let rate = flipped as f64 / bits.len() as f64;
        assert!((rate - 0.25).abs() < 0.005, "flip rate {rate}");
    }

    #[test]
    fn rr_ratio_is_exactly_exp_epsilon() {
        // P[out=b|in=b] / P[out=b|in=!b] = p/(1-p) = e^eps, algebraically.
        for eps in [0.1, 1.0, 3f64.ln(), 5.0] {
            let p = RRParams::new(eps).unwrap().keep_probability();
            assert!(((p / (1.0 - p)).ln() - eps).abs() < 1e-12);
            assert!(p > 0.5 && p < 1.0);
        }
    }

    #[test]
    fn add_density_ratio_bounded_by_exp_epsilon() {
        // Analytic epsilon-LDP check on the residue pair (0.9, -0.9): for
        // Laplace scale 2/eps the density ratio at any output z is
        // exp(eps (|z - r_i| - |z - r_j|) / 2) <= e^eps.
        let (r_i, r_j) = (0.9, -0.9);
        for eps in [0.1, 1.0, 10.0] {
            for z10 in -30..=30 {
                let z = z10 as f64 / 10.0;
                let ratio = (eps * ((z - r_j).abs() - (z - r_i).abs()) / 2.0).exp();
                assert!(
                    ratio <= eps.exp() * (1.0 + 1e-12),
                    "eps {eps} z {z} ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn mult_density_ratio_bounded_by_exp_epsilon() {
        // After clip1, |1/r| <= 1/b1, so Delta = 2/b1; for |z| <= b2 the
        // ratio exp(eps (|z/r_j| - |z/r_i|) / (b2 Delta)) stays within e^eps.
        let b1 = 0.1;
        let b2 = 10.0;
        let delta = 2.0 / b1;
        for eps in [0.5, 10.0] {
            for ri10 in [-9i32, -3, -1, 1, 5, 9] {
                for rj10 in [-9i32, -2, 1, 4, 9] {
                    let r_i = clip1(ri10 as f64 / 10.0, b1, ClipMode::SignPreserving);
                    let r_j = clip1(rj10 as f64 / 10.0, b1, ClipMode::SignPreserving);
                    for z10 in -100..=100 {
                        let z = z10 as f64 / 10.0;
                        let ratio =
                            (eps * ((z / r_j).abs() - (z / r_i).abs()) / (b2 * delta)).exp();
                        assert!(
                            ratio <= eps.exp() * (1.0 + 1e-12),
                            "eps {eps} r_i {r_i} r_j {r_j} z {z}"
                        );
                    }
                }
            }
        }
    }
}
