//! Protocol messages, transcripts, and transcript files.
//!
//! A [`Transcript`] is the passive party's complete view of one training run:
//! every message that crossed the party boundary, in order, plus her own
//! gradient-mask draws (private randomness she holds anyway and needs to
//! unmask gradients during offline replay). Mask records are stored in the
//! file under a dedicated annotation kind and are not wire messages; the
//! message-sequence checks ignore them.
//!
//! File layout: magic `VFLT`, version byte, then a stream of frames in wire
//! encoding. Wall-clock timings are measurement artifacts and never serialized,
//! so transcripts from the in-process and socket backends are byte-identical.

use std::fs;
use std::path::Path;

use num_bigint::{BigInt, BigUint};

use crate::error::{Error, Result};
use crate::wire::{Frame, Reader, Writer};

const MAGIC: &[u8; 4] = b"VFLT";
const VERSION: u8 = 1;

/// Party that emitted a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sender {
    Bob,
    Alice,
}

impl Sender {
    fn to_byte(self) -> u8 {
        match self {
            Sender::Bob => 0,
            Sender::Alice => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Sender::Bob),
            1 => Ok(Sender::Alice),
            other => Err(Error::parse(format!("bad sender byte {other}"))),
        }
    }
}

/// Message kinds, one byte each on the wire.
pub mod kind {
    pub const PUBLIC_KEY: u8 = 0;
    pub const BATCH_ANNOUNCE: u8 = 1;
    pub const PARTIAL_LIN_PRED: u8 = 2;
    pub const ENC_RESIDUES: u8 = 3;
    pub const MASKED_ENC_GRADIENT: u8 = 4;
    pub const DEC_MASKED_GRADIENT: u8 = 5;
    pub const PLAIN_NOISED_RESIDUES: u8 = 6;
    /// Annotation frame: Alice's per-round mask integers. Not a wire message.
    pub const ALICE_MASK_RECORD: u8 = 0x40;
}

/// Every datum crossing the party boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    /// Bob's Paillier modulus plus the fixed-point scale the run uses.
    PublicKeyMsg { n: BigUint, fp_scale: u64 },
    /// The round's announced sample indices and (for the hybrid protocol) the
    /// obscured indicator vector over them. The baseline and LDP protocols
    /// announce an all-ones indicator.
    BatchAnnounce {
        rr_mask: Vec<bool>,
        indices: Vec<u32>,
    },
    /// Alice's partial linear predictions over the forwarded samples.
    PartialLinPred { values: Vec<f64> },
    /// Encrypted (fixed-point) residues, one per forwarded sample.
    EncResidues { ciphertexts: Vec<BigUint> },
    /// Encrypted masked gradient sums, one per Alice feature.
    MaskedEncGradient { ciphertexts: Vec<BigUint> },
    /// Decrypted masked gradient sums in the fixed-point integer domain.
    DecMaskedGradient { values: Vec<BigInt> },
    /// Residues protected by an LDP mechanism, sent in plaintext.
    PlainNoisedResidues { values: Vec<f64> },
}

impl MessageBody {
    pub fn kind(&self) -> u8 {
        match self {
            MessageBody::PublicKeyMsg { .. } => kind::PUBLIC_KEY,
            MessageBody::BatchAnnounce { .. } => kind::BATCH_ANNOUNCE,
            MessageBody::PartialLinPred { .. } => kind::PARTIAL_LIN_PRED,
            MessageBody::EncResidues { .. } => kind::ENC_RESIDUES,
            MessageBody::MaskedEncGradient { .. } => kind::MASKED_ENC_GRADIENT,
            MessageBody::DecMaskedGradient { .. } => kind::DEC_MASKED_GRADIENT,
            MessageBody::PlainNoisedResidues { .. } => kind::PLAIN_NOISED_RESIDUES,
        }
    }
}

/// One protocol message with its round number and sender.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolMessage {
    pub round: u32,
    pub sender: Sender,
    pub body: MessageBody,
}

impl ProtocolMessage {
    pub fn to_frame(&self) -> Frame {
        let mut w = Writer::new();
        w.u32(self.round).u8(self.sender.to_byte());
        match &self.body {
            MessageBody::PublicKeyMsg { n, fp_scale } => {
                w.biguint(n).u64(*fp_scale);
            }
            MessageBody::BatchAnnounce { rr_mask, indices } => {
                w.bit_vec(rr_mask).index_vec(indices);
            }
            MessageBody::PartialLinPred { values } => {
                w.f64_vec(values);
            }
            MessageBody::EncResidues { ciphertexts } => {
                w.biguint_vec(ciphertexts);
            }
            MessageBody::MaskedEncGradient { ciphertexts } => {
                w.biguint_vec(ciphertexts);
            }
            MessageBody::DecMaskedGradient { values } => {
                w.bigint_vec(values);
            }
            MessageBody::PlainNoisedResidues { values } => {
                w.f64_vec(values);
            }
        }
        Frame {
            kind: self.body.kind(),
            payload: w.into_payload(),
        }
    }

    pub fn from_frame(frame: &Frame) -> Result<Self> {
        let mut r = Reader::new(&frame.payload);
        let round = r.u32()?;
        let sender = Sender::from_byte(r.u8()?)?;
        let body = match frame.kind {
            kind::PUBLIC_KEY => MessageBody::PublicKeyMsg {
                n: r.biguint()?,
                fp_scale: r.u64()?,
            },
            kind::BATCH_ANNOUNCE => MessageBody::BatchAnnounce {
                rr_mask: r.bit_vec()?,
                indices: r.index_vec()?,
            },
            kind::PARTIAL_LIN_PRED => MessageBody::PartialLinPred {
                values: r.f64_vec()?,
            },
            kind::ENC_RESIDUES => MessageBody::EncResidues {
                ciphertexts: r.biguint_vec()?,
            },
            kind::MASKED_ENC_GRADIENT => MessageBody::MaskedEncGradient {
                ciphertexts: r.biguint_vec()?,
            },
            kind::DEC_MASKED_GRADIENT => MessageBody::DecMaskedGradient {
                values: r.bigint_vec()?,
            },
            kind::PLAIN_NOISED_RESIDUES => MessageBody::PlainNoisedResidues {
                values: r.f64_vec()?,
            },
            other => return Err(Error::parse(format!("unknown message kind {other}"))),
        };
        r.finish()?;
        Ok(ProtocolMessage {
            round,
            sender,
            body,
        })
    }
}

/// Alice's gradient-mask integers for one round (annotation, not a message).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRecord {
    pub round: u32,
    pub masks: Vec<BigInt>,
}

impl MaskRecord {
    fn to_frame(&self) -> Frame {
        let mut w = Writer::new();
        w.u32(self.round).bigint_vec(&self.masks);
        Frame {
            kind: kind::ALICE_MASK_RECORD,
            payload: w.into_payload(),
        }
    }

    fn from_frame(frame: &Frame) -> Result<Self> {
        let mut r = Reader::new(&frame.payload);
        let record = MaskRecord {
            round: r.u32()?,
            masks: r.bigint_vec()?,
        };
        r.finish()?;
        Ok(record)
    }
}

/// Wall-clock measurements for one round (in-memory only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTiming {
    pub round: u32,
    pub seconds: f64,
}

/// The passive party's replayable view of a run.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub messages: Vec<ProtocolMessage>,
    pub alice_masks: Vec<MaskRecord>,
    pub round_timings: Vec<RoundTiming>,
}

impl Transcript {
    /// Serialize to bytes: header, message frames in order, then mask
    /// records in round order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for m in &self.messages {
            out.extend_from_slice(&m.to_frame().encode());
        }
        for rec in &self.alice_masks {
            out.extend_from_slice(&rec.to_frame().encode());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 5 || &data[0..4] != MAGIC {
            return Err(Error::parse("not a VFLT transcript"));
        }
        if data[4] != VERSION {
            return Err(Error::parse(format!(
                "unsupported transcript version {}",
                data[4]
            )));
        }
        let mut transcript = Transcript::default();
        let mut pos = 5;
        while pos < data.len() {
            let (frame, used) = Frame::decode(&data[pos..])?;
            pos += used;
            if frame.kind == kind::ALICE_MASK_RECORD {
                transcript.alice_masks.push(MaskRecord::from_frame(&frame)?);
            } else {
                transcript
                    .messages
                    .push(ProtocolMessage::from_frame(&frame)?);
            }
        }
        Ok(transcript)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Transcript::from_bytes(&fs::read(path)?)
    }

    pub fn mask_for_round(&self, round: u32) -> Option<&MaskRecord> {
        self.alice_masks.iter().find(|m| m.round == round)
    }

    /// Highest round number present, plus one.
    pub fn round_count(&self) -> u32 {
        self.messages.iter().map(|m| m.round + 1).max().unwrap_or(0)
    }
}

/// Which message sequence a run must follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFlavor {
    /// Key exchange once, then per round: announce, partial predictions,
    /// encrypted residues, masked gradient, decrypted masked gradient.
    /// Covers both the baseline and the hybrid protocol.
    EncryptedResidue,
    /// No key material; per round: announce, partial predictions, plaintext
    /// noised residues.
    PlainLdp,
}

/// Check a message list against the protocol's regular grammar, including
/// senders and round numbering.
pub fn check_message_sequence(messages: &[ProtocolMessage], flavor: ProtocolFlavor) -> Result<()> {
    let round_pattern: &[(u8, Sender)] = match flavor {
        ProtocolFlavor::EncryptedResidue => &[
            (kind::BATCH_ANNOUNCE, Sender::Bob),
            (kind::PARTIAL_LIN_PRED, Sender::Alice),
            (kind::ENC_RESIDUES, Sender::Bob),
            (kind::MASKED_ENC_GRADIENT, Sender::Alice),
            (kind::DEC_MASKED_GRADIENT, Sender::Bob),
        ],
        ProtocolFlavor::PlainLdp => &[
            (kind::BATCH_ANNOUNCE, Sender::Bob),
            (kind::PARTIAL_LIN_PRED, Sender::Alice),
            (kind::PLAIN_NOISED_RESIDUES, Sender::Bob),
        ],
    };

    let mut iter = messages.iter().peekable();
    if flavor == ProtocolFlavor::EncryptedResidue {
        match iter.next() {
            Some(m) if m.body.kind() == kind::PUBLIC_KEY && m.sender == Sender::Bob => {}
            other => {
                return Err(Error::protocol(format!(
                    "expected initial public key message, got {other:?}"
                )))
            }
        }
    }
    let mut round = 0u32;
    while iter.peek().is_some() {
        for &(expect_kind, expect_sender) in round_pattern {
            match iter.next() {
                Some(m)
                    if m.body.kind() == expect_kind
                        && m.sender == expect_sender
                        && m.round == round => {}
                other => {
                    return Err(Error::protocol(format!(
                        "round {round}: expected kind {expect_kind} from {expect_sender:?}, got {other:?}"
                    )))
                }
            }
        }
        round += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_messages() -> Vec<ProtocolMessage> {
        vec![
            ProtocolMessage {
                round: 0,
                sender: Sender::Bob,
                body: MessageBody::PublicKeyMsg {
                    n: BigUint::from(143u32),
                    fp_scale: 1_000_000,
                },
            },
            ProtocolMessage {
                round: 0,
                sender: Sender::Bob,
                body: MessageBody::BatchAnnounce {
                    rr_mask: vec![true, true, false],
                    indices: vec![4, 9, 2],
                },
            },
            ProtocolMessage {
                round: 0,
                sender: Sender::Alice,
                body: MessageBody::PartialLinPred {
                    values: vec![0.25, -1.5],
                },
            },
            ProtocolMessage {
                round: 0,
                sender: Sender::Bob,
                body: MessageBody::EncResidues {
                    ciphertexts: vec![BigUint::from(1234u32), BigUint::from(77u32)],
                },
            },
            ProtocolMessage {
                round: 0,
                sender: Sender::Alice,
                body: MessageBody::MaskedEncGradient {
                    ciphertexts: vec![BigUint::from(999u32)],
                },
            },
            ProtocolMessage {
                round: 0,
                sender: Sender::Bob,
                body: MessageBody::DecMaskedGradient {
                    values: vec![BigInt::from(-42), BigInt::from(7)],
                },
            },
        ]
    }

    #[test]
    fn messages_roundtrip_through_frames() {
        for m in sample_messages() {
            let frame = m.to_frame();
            let back = ProtocolMessage::from_frame(&frame).unwrap();
            assert_eq!(back, m);
        }
        let plain = ProtocolMessage {
            round: 3,
            sender: Sender::Bob,
            body: MessageBody::PlainNoisedResidues {
                values: vec![0.5, -0.25, 12.0],
            },
        };
        assert_eq!(
            ProtocolMessage::from_frame(&plain.to_frame()).unwrap(),
            plain
        );
    }

    #[test]
    fn transcript_file_roundtrip() {
        let t = Transcript {
            messages: sample_messages(),
            alice_masks: vec![MaskRecord {
                round: 0,
                masks: vec![BigInt::from(123456789i64), BigInt::from(-5)],
            }],
            round_timings: vec![RoundTiming {
                round: 0,
                seconds: 0.5,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.vflt");
        t.save(&path).unwrap();
        let back = Transcript::load(&path).unwrap();
        assert_eq!(back.messages, t.messages);
        assert_eq!(back.alice_masks, t.alice_masks);
        // Timings are measurement artifacts and do not survive the file.
        assert!(back.round_timings.is_empty());
    }

    #[test]
    fn version_mismatch_rejected() {
        let t = Transcript {
            messages: sample_messages(),
            ..Default::default()
        };
        let mut bytes = t.to_bytes();
        bytes[4] = 9;
        assert!(Transcript::from_bytes(&bytes).is_err());
        assert!(Transcript::from_bytes(b"nope").is_err());
    }

    #[test]
    fn grammar_accepts_valid_sequences() {
        check_message_sequence(&sample_messages(), ProtocolFlavor::EncryptedResidue).unwrap();
    }

    #[test]
    fn grammar_rejects_reordered_and_misnumbered() {
        let mut msgs = sample_messages();
        msgs.swap(2, 3);
        assert!(check_message_sequence(&msgs, ProtocolFlavor::EncryptedResidue).is_err());

        let mut msgs = sample_messages();
        msgs[3].round = 1;
        assert!(check_message_sequence(&msgs, ProtocolFlavor::EncryptedResidue).is_err());

        // Missing key exchange.
        let msgs = sample_messages()[1..].to_vec();
        assert!(check_message_sequence(&msgs, ProtocolFlavor::EncryptedResidue).is_err());

        // Truncated round.
        let msgs = sample_messages()[..4].to_vec();
        assert!(check_message_sequence(&msgs, ProtocolFlavor::EncryptedResidue).is_err());
    }
}
