//! Paillier additive homomorphic cryptosystem.
//!
//! Ciphertext products decrypt to plaintext sums and ciphertext powers to
//! plaintext scalar multiples, which is all the training protocol needs to
//! let the passive party accumulate an encrypted gradient. The generator is
//! fixed to `g = n + 1`, so encryption reduces to `(1 + m n) r^n mod n^2`.

mod codec;
mod keyfile;
mod primes;

pub use codec::{FixedPointCodec, DEFAULT_SCALE};
pub use keyfile::{load_private_key, load_public_key, save_private_key, save_public_key};
pub use primes::{is_probable_prime, random_prime, MILLER_RABIN_ROUNDS};

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Key lengths accepted by [`keygen`]. 512 is for test suites; production
/// defaults to 2048.
pub const SUPPORTED_KEY_BITS: [usize; 3] = [512, 1024, 2048];

/// Paillier public key with cached `n^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    g: BigUint,
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Self {
        let n_squared = &n * &n;
        let g = &n + 1u8;
        PublicKey { n, n_squared, g }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }
}

/// Paillier private key: `lambda = lcm(p-1, q-1)` and
/// `mu = L(g^lambda mod n^2)^{-1} mod n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
    p: BigUint,
    q: BigUint,
}

impl PrivateKey {
    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }
}

/// A Paillier ciphertext: an integer in `[0, n^2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    value: BigUint,
}

impl Ciphertext {
    /// Wrap a raw ciphertext integer (e.g. read off the wire).
    pub fn from_value(value: BigUint) -> Self {
        Ciphertext { value }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }
}

/// `L(u) = (u - 1) / n`, defined on `u = 1 mod n`.
fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u8) / n
}

fn modinv(a: &BigUint, m: &BigUint) -> Result<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let m_int = BigInt::from_biguint(Sign::Plus, m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return Err(Error::domain("modular inverse does not exist"));
    }
    let mut x = ext.x % &m_int;
    if x.is_negative() {
        x += &m_int;
    }
    Ok(x.to_biguint().expect("non-negative after reduction"))
}

/// Build a keypair from explicit primes. Used by tests with toy primes and by
/// key-file loading; [`keygen`] is the normal path.
pub fn keypair_from_primes(p: BigUint, q: BigUint) -> Result<(PublicKey, PrivateKey)> {
    if p == q {
        return Err(Error::config("paillier primes must be distinct"));
    }
    let n = &p * &q;
    let pk = PublicKey::from_modulus(n.clone());
    let lambda = (&p - 1u8).lcm(&(&q - 1u8));
    let u = pk.g.modpow(&lambda, &pk.n_squared);
    let mu = modinv(&l_function(&u, &n), &n)
        .map_err(|_| Error::config("degenerate primes: mu not invertible"))?;
    Ok((pk, PrivateKey { lambda, mu, p, q }))
}

/// Generate a keypair with modulus of roughly `bits` bits.
pub fn keygen(bits: usize, rng: &mut RngStream) -> Result<(PublicKey, PrivateKey)> {
    if !SUPPORTED_KEY_BITS.contains(&bits) {
        return Err(Error::config(format!(
            "unsupported key length {bits}; expected one of {SUPPORTED_KEY_BITS:?}"
        )));
    }
    let half = (bits / 2) as u64;
    let p = random_prime(half, rng);
    let q = loop {
        let q = random_prime(half, rng);
        if q != p {
            break q;
        }
    };
    keypair_from_primes(p, q)
}

/// Encrypt `m` in `[0, n)` with fresh randomness `r` coprime to `n`.
pub fn encrypt(pk: &PublicKey, m: &BigUint, rng: &mut RngStream) -> Result<Ciphertext> {
    if m >= &pk.n {
        return Err(Error::domain(format!(
            "plaintext ({} bits) not below modulus ({} bits)",
            m.bits(),
            pk.n.bits()
        )));
    }
    let r = loop {
        let r = rng.gen_biguint_below(&pk.n);
        if !r.is_zero() && r.gcd(&pk.n).is_one() {
            break r;
        }
    };
    // g = n+1 makes g^m = 1 + m n (mod n^2).
    let g_to_m = (1u8 + m * &pk.n) % &pk.n_squared;
    let r_to_n = r.modpow(&pk.n, &pk.n_squared);
    Ok(Ciphertext {
        value: (g_to_m * r_to_n) % &pk.n_squared,
    })
}

/// Decrypt to the plaintext ring `[0, n)`.
pub fn decrypt(pk: &PublicKey, sk: &PrivateKey, c: &Ciphertext) -> BigUint {
    let u = c.value.modpow(&sk.lambda, &pk.n_squared);
    (l_function(&u, &pk.n) * &sk.mu) % &pk.n
}

/// Homomorphic addition: decrypts to `(m1 + m2) mod n`.
pub fn add_cipher(pk: &PublicKey, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
    Ciphertext {
        value: (&c1.value * &c2.value) % &pk.n_squared,
    }
}

/// Homomorphic scalar multiplication: decrypts to `(k * m) mod n`.
///
/// Negative `k` acts as the ring element `n + k`; it is evaluated as
/// `(c^{-1})^{|k|}` so the exponent stays |k|-sized instead of n-sized.
pub fn scalar_mult(pk: &PublicKey, k: &BigInt, c: &Ciphertext) -> Result<Ciphertext> {
    let magnitude = k.magnitude();
    if magnitude >= &pk.n {
        return Err(Error::domain("scalar magnitude not below modulus"));
    }
    let base = if k.is_negative() {
        modinv(&c.value, &pk.n_squared)
            .map_err(|_| Error::domain("ciphertext not invertible mod n^2"))?
    } else {
        c.value.clone()
    };
    Ok(Ciphertext {
        value: base.modpow(magnitude, &pk.n_squared),
    })
}

/// Encryption of zero with unit randomness; the identity for [`add_cipher`].
pub fn trivial_zero(pk: &PublicKey) -> Ciphertext {
    let _ = pk;
    Ciphertext {
        value: BigUint::one(),
    }
}
