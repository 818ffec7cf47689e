//! Versioned binary key files.
//!
//! Layout: magic `VFLK`, version byte, kind byte (0 = public, 1 = private),
//! then length-prefixed big-endian integers: `n` for public keys; `n`, `p`,
//! `q` for private keys (lambda and mu are recomputed on load).

use std::fs;
use std::path::Path;

use num_bigint::BigUint;

use crate::error::{Error, Result};

use super::{keypair_from_primes, PrivateKey, PublicKey};

const MAGIC: &[u8; 4] = b"VFLK";
const VERSION: u8 = 1;
const KIND_PUBLIC: u8 = 0;
const KIND_PRIVATE: u8 = 1;

fn put_biguint(buf: &mut Vec<u8>, v: &BigUint) {
    let bytes = v.to_bytes_be();
    buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    buf.extend_from_slice(&bytes);
}

fn read_biguint(data: &[u8], pos: &mut usize) -> Result<BigUint> {
    if data.len() < *pos + 4 {
        return Err(Error::parse("key file truncated (length prefix)"));
    }
    let len = u32::from_be_bytes(data[*pos..*pos + 4].try_into().unwrap()) as usize;
    *pos += 4;
    if data.len() < *pos + len {
        return Err(Error::parse("key file truncated (integer body)"));
    }
    let v = BigUint::from_bytes_be(&data[*pos..*pos + len]);
    *pos += len;
    Ok(v)
}

fn check_header(data: &[u8], expect_kind: u8) -> Result<usize> {
    if data.len() < 6 || &data[0..4] != MAGIC {
        return Err(Error::parse("not a VFLK key file"));
    }
    if data[4] != VERSION {
        return Err(Error::parse(format!(
            "unsupported key file version {}",
            data[4]
        )));
    }
    if data[5] != expect_kind {
        return Err(Error::parse("key file kind mismatch (public vs private)"));
    }
    Ok(6)
}

pub fn save_public_key(path: &Path, pk: &PublicKey) -> Result<()> {
    let mut buf = vec![];
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(KIND_PUBLIC);
    put_biguint(&mut buf, pk.modulus());
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_public_key(path: &Path) -> Result<PublicKey> {
    let data = fs::read(path)?;
    let mut pos = check_header(&data, KIND_PUBLIC)?;
    let n = read_biguint(&data, &mut pos)?;
    Ok(PublicKey::from_modulus(n))
}

pub fn save_private_key(path: &Path, pk: &PublicKey, sk: &PrivateKey) -> Result<()> {
    let mut buf = vec![];
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(KIND_PRIVATE);
    put_biguint(&mut buf, pk.modulus());
    let (p, q) = sk.primes();
    put_biguint(&mut buf, p);
    put_biguint(&mut buf, q);
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_private_key(path: &Path) -> Result<(PublicKey, PrivateKey)> {
    let data = fs::read(path)?;
    let mut pos = check_header(&data, KIND_PRIVATE)?;
    let n = read_biguint(&data, &mut pos)?;
    let p = read_biguint(&data, &mut pos)?;
    let q = read_biguint(&data, &mut pos)?;
    if &p * &q != n {
        return Err(Error::parse("private key file: p*q != n"));
    }
    keypair_from_primes(p, q)
}
