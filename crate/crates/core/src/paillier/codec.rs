//! Fixed-point codec between reals and the Paillier plaintext ring.
//!
//! `encode(x) = round(x * scale) mod n`, with negative values stored in the
//! upper half of the ring as `n - round(|x| * scale)`. A product of two
//! encoded values carries `scale^2`; [`FixedPointCodec::decode_exp`] divides
//! by the right power when decoding accumulated gradient sums.

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

use super::PublicKey;

/// Default fixed-point scale: residues live in (-1,1) and a 1e-6 grid sits
/// far below the learning-rate scale.
pub const DEFAULT_SCALE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointCodec {
    scale: u64,
    modulus: BigUint,
    half_modulus: BigUint,
}

impl FixedPointCodec {
    pub fn new(scale: u64, pk: &PublicKey) -> Result<Self> {
        Self::with_modulus(scale, pk.modulus().clone())
    }

    pub fn with_modulus(scale: u64, modulus: BigUint) -> Result<Self> {
        if scale == 0 {
            return Err(Error::config("fixed-point scale must be positive"));
        }
        let half_modulus = &modulus >> 1;
        Ok(FixedPointCodec {
            scale,
            modulus,
            half_modulus,
        })
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// Signed integer `round(x * scale)`, before ring reduction.
    pub fn encode_int(&self, x: f64) -> Result<i128> {
        if !x.is_finite() {
            return Err(Error::domain("cannot encode non-finite value"));
        }
        let scaled = x * self.scale as f64;
        if scaled.abs() >= i128::MAX as f64 / 2.0 {
            return Err(Error::overflow(format!("{x} at scale {}", self.scale)));
        }
        Ok(scaled.round() as i128)
    }

    /// Ring element for `x`; requires `|x| < n / (2 * scale)`.
    pub fn encode(&self, x: f64) -> Result<BigUint> {
        let v = self.encode_int(x)?;
        self.ring_from_int(&BigInt::from(v))
    }

    /// Reduce a signed fixed-point integer into the ring, rejecting values
    /// whose magnitude reaches `n/2` (the sign would become ambiguous).
    pub fn ring_from_int(&self, v: &BigInt) -> Result<BigUint> {
        let mag = v.magnitude();
        if mag >= &self.half_modulus {
            return Err(Error::overflow(
                "fixed-point magnitude reaches half the modulus",
            ));
        }
        if v.sign() == num_bigint::Sign::Minus {
            Ok(&self.modulus - mag)
        } else {
            Ok(mag.clone())
        }
    }

    /// Signed integer view of a ring element (upper half maps to negatives).
    pub fn int_from_ring(&self, m: &BigUint) -> BigInt {
        if m > &self.half_modulus {
            -BigInt::from(&self.modulus - m)
        } else {
            BigInt::from(m.clone())
        }
    }

    /// Decode a ring element at multiplication depth 1.
    pub fn decode(&self, m: &BigUint) -> f64 {
        self.decode_exp(m, 1)
    }

    /// Decode a ring element carrying `scale^exp`.
    pub fn decode_exp(&self, m: &BigUint, exp: u32) -> f64 {
        let signed = self.int_from_ring(m);
        let v = signed.to_f64().unwrap_or(f64::INFINITY);
        v / (self.scale as f64).powi(exp as i32)
    }
}
