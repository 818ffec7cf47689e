//! Bit-exact binary encodings shared by the socket backend and transcript
//! files.
//!
//! Frame layout: 4-byte big-endian payload length, 1-byte message kind,
//! payload. Element encodings inside payloads:
//!
//! - signed integer: 4-byte length, big-endian magnitude (minimal, no leading
//!   zeros), 1 sign byte (0 = non-negative, 1 = negative);
//! - unsigned integer (ciphertexts, moduli): 4-byte length, big-endian
//!   magnitude;
//! - real vector: 4-byte count, IEEE-754 binary64 big-endian elements;
//! - bit vector: 4-byte count, one byte per bit (0/1);
//! - index vector: 4-byte count, 4-byte big-endian elements.

use num_bigint::{BigInt, BigUint, Sign};

use crate::error::{Error, Result};

/// A length-delimited frame: kind byte plus payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decode one frame from the front of `data`, returning it and the number
    /// of bytes consumed.
    pub fn decode(data: &[u8]) -> Result<(Frame, usize)> {
        if data.len() < 5 {
            return Err(Error::parse("frame truncated (header)"));
        }
        let len = u32::from_be_bytes(data[0..4].try_into().unwrap()) as usize;
        if data.len() < 5 + len {
            return Err(Error::parse("frame truncated (payload)"));
        }
        Ok((
            Frame {
                kind: data[4],
                payload: data[5..5 + len].to_vec(),
            },
            5 + len,
        ))
    }
}

/// Sequential reader over a payload.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn finish(&self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(Error::parse(format!(
                "{} trailing bytes in payload",
                self.data.len() - self.pos
            )))
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < self.pos + n {
            return Err(Error::parse("payload truncated"));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn biguint(&mut self) -> Result<BigUint> {
        let len = self.u32()? as usize;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    pub fn bigint(&mut self) -> Result<BigInt> {
        let len = self.u32()? as usize;
        let mag = BigUint::from_bytes_be(self.take(len)?);
        let sign_byte = self.u8()?;
        match sign_byte {
            0 => Ok(BigInt::from(mag)),
            1 => Ok(-BigInt::from(mag)),
            other => Err(Error::parse(format!("bad sign byte {other}"))),
        }
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let count = self.u32()? as usize;
        (0..count).map(|_| self.f64()).collect()
    }

    pub fn bit_vec(&mut self) -> Result<Vec<bool>> {
        let count = self.u32()? as usize;
        let bytes = self.take(count)?;
        bytes
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::parse(format!("bad bit byte {other}"))),
            })
            .collect()
    }

    pub fn index_vec(&mut self) -> Result<Vec<u32>> {
        let count = self.u32()? as usize;
        (0..count).map(|_| self.u32()).collect()
    }

    pub fn biguint_vec(&mut self) -> Result<Vec<BigUint>> {
        let count = self.u32()? as usize;
        (0..count).map(|_| self.biguint()).collect()
    }

    pub fn bigint_vec(&mut self) -> Result<Vec<BigInt>> {
        let count = self.u32()? as usize;
        (0..count).map(|_| self.bigint()).collect()
    }
}

/// Payload builder mirroring [`Reader`].
#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer::default()
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn biguint(&mut self, v: &BigUint) -> &mut Self {
        let bytes = v.to_bytes_be();
        // num-bigint encodes zero as [0]; keep the minimal empty form.
        let bytes: &[u8] = if v == &BigUint::default() {
            &[]
        } else {
            &bytes
        };
        self.u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn bigint(&mut self, v: &BigInt) -> &mut Self {
        self.biguint(v.magnitude());
        self.u8(u8::from(v.sign() == Sign::Minus));
        self
    }

    pub fn f64_vec(&mut self, v: &[f64]) -> &mut Self {
        self.u32(v.len() as u32);
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn bit_vec(&mut self, v: &[bool]) -> &mut Self {
        self.u32(v.len() as u32);
        for &b in v {
            self.u8(u8::from(b));
        }
        self
    }

    pub fn index_vec(&mut self, v: &[u32]) -> &mut Self {
        self.u32(v.len() as u32);
        for &i in v {
            self.u32(i);
        }
        self
    }

    pub fn biguint_vec(&mut self, v: &[BigUint]) -> &mut Self {
        self.u32(v.len() as u32);
        for x in v {
            self.biguint(x);
        }
        self
    }

    pub fn bigint_vec(&mut self, v: &[BigInt]) -> &mut Self {
        self.u32(v.len() as u32);
        for x in v {
            self.bigint(x);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_roundtrip() {
        let f = Frame {
            kind: 3,
            payload: vec![1, 2, 3, 4],
        };
        let bytes = f.encode();
        let (back, used) = Frame::decode(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(used, bytes.len());
        assert!(Frame::decode(&bytes[..4]).is_err());
        assert!(Frame::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn zero_biguint_is_empty_magnitude() {
        let mut w = Writer::new();
        w.biguint(&BigUint::default());
        assert_eq!(w.into_payload(), vec![0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn payload_elements_roundtrip(
            ints in proptest::collection::vec(any::<i128>(), 0..8),
            reals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..8),
            bits in proptest::collection::vec(any::<bool>(), 0..16),
            indices in proptest::collection::vec(any::<u32>(), 0..8),
        ) {
            let big_ints: Vec<BigInt> = ints.iter().map(|&v| BigInt::from(v)).collect();
            let mut w = Writer::new();
            w.bigint_vec(&big_ints).f64_vec(&reals).bit_vec(&bits).index_vec(&indices);
            let payload = w.into_payload();
            let mut r = Reader::new(&payload);
            prop_assert_eq!(r.bigint_vec().unwrap(), big_ints);
            prop_assert_eq!(r.f64_vec().unwrap(), reals);
            prop_assert_eq!(r.bit_vec().unwrap(), bits);
            prop_assert_eq!(r.index_vec().unwrap(), indices);
            r.finish().unwrap();
        }
    }
}
