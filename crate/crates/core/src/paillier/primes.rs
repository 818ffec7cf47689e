//! Probabilistic prime generation for key material.

use num_bigint::{BigUint, RandBigInt};

use num_traits::{One, Zero};
use std::sync::OnceLock;

use crate::rng::RngStream;

/// Miller-Rabin rounds used for key generation.
pub const MILLER_RABIN_ROUNDS: usize = 40;

fn small_primes() -> &'static [u64] {
    static SIEVE: OnceLock<Vec<u64>> = OnceLock::new();
    SIEVE.get_or_init(|| {
        let limit = 2000usize;
        let mut is_comp = vec![false; limit];
        let mut primes = Vec::new();
        for p in 2..limit {
            if !is_comp[p] {
                primes.push(p as u64);
                let mut q = p * p;
                while q < limit {
                    is_comp[q] = true;
                    q += p;
                }
            }
        }
        primes
    })
}

/// Miller-Rabin with `rounds` random bases drawn from `rng`.
pub fn is_probable_prime(n: &BigUint, rounds: usize, rng: &mut RngStream) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &p in small_primes() {
        let sp = BigUint::from(p);
        if n == &sp {
            return true;
        }
        if (n % sp).is_zero() {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    'outer: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &(n - 2u8));
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Random probable prime with exactly `bits` bits (top bit forced).
pub fn random_prime(bits: u64, rng: &mut RngStream) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;

    #[test]
    fn classifies_small_numbers() {
        let mut rng = RngStream::new(1);
        for (n, expect) in [
            (2u64, true),
            (3, true),
            (4, false),
            (17, true),
            (561, false), // Carmichael
            (7919, true),
            (7921, false),
        ] {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), 20, &mut rng),
                expect,
                "n = {n}"
            );
        }
    }

    #[test]
    fn generated_primes_have_requested_size() {
        let mut rng = RngStream::new(2);
        let p = random_prime(128, &mut rng);
        assert_eq!(p.bits(), 128);
        assert!(p.is_odd());
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let mut a = RngStream::new(3);
        let mut b = RngStream::new(3);
        assert_eq!(random_prime(96, &mut a), random_prime(96, &mut b));
    }
}
