//! Party state machines.
//!
//! Both parties are written against the [`Channel`] trait, so the same code
//! drives in-process runs and the socket backend. The protocol is strictly
//! turn-based; every receive states which message it expects and fails with a
//! protocol error on anything else.

use std::time::Instant;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::mechanisms::{self, AddNoiseParams, MultNoiseParams, RRParams};
use crate::message::{
    kind, MaskRecord, MessageBody, ProtocolMessage, RoundTiming, Sender, Transcript,
};
use crate::numeric::{logistic_loss_logits, sigmoid, DenseMatrix, DenseVector};
use crate::paillier::{
    add_cipher, decrypt, encrypt, keygen, scalar_mult, Ciphertext, FixedPointCodec, PrivateKey,
    PublicKey,
};
use crate::rng::{RngStream, PARTY_ALICE, PARTY_BOB};

use super::{draw_hybrid_round_state, sample_batch, Channel, Defense, RoundLog, TrainConfig};

/// Exponent of the uniform gradient-mask range: mask values are fixed-point
/// representable reals in `[-2^16, 2^16)`.
const MASK_RANGE_BITS: u32 = 16;

fn send_message(ch: &mut dyn Channel, msg: &ProtocolMessage) -> Result<()> {
    ch.send(&msg.to_frame().encode())
}

fn recv_message(ch: &mut dyn Channel) -> Result<ProtocolMessage> {
    let bytes = ch.recv()?;
    let (frame, used) = crate::wire::Frame::decode(&bytes)?;
    if used != bytes.len() {
        return Err(Error::protocol("trailing bytes after frame"));
    }
    ProtocolMessage::from_frame(&frame)
}

fn expect_message(
    ch: &mut dyn Channel,
    round: u32,
    expected_kind: u8,
    expected_sender: Sender,
) -> Result<ProtocolMessage> {
    let msg = recv_message(ch)?;
    if msg.body.kind() != expected_kind || msg.round != round || msg.sender != expected_sender {
        return Err(Error::protocol(format!(
            "round {round}: expected kind {expected_kind} from {expected_sender:?}, \
             got kind {} round {} from {:?}",
            msg.body.kind(),
            msg.round,
            msg.sender
        )));
    }
    Ok(msg)
}

/// What the active party ends a run with.
#[derive(Debug)]
pub struct BobOutcome {
    pub w: DenseVector,
    pub per_epoch_loss: Vec<f64>,
    pub round_logs: Vec<RoundLog>,
    pub round_timings: Vec<RoundTiming>,
    pub crypto_s: f64,
}

/// What the passive party ends a run with.
#[derive(Debug)]
pub struct AliceOutcome {
    pub w: DenseVector,
    pub transcript: Transcript,
    pub crypto_s: f64,
}

struct BobRoundPlan {
    announced: Vec<u32>,
    rr_mask: Vec<bool>,
    forwarded: Vec<u32>,
    /// Positions within `forwarded` whose residues drive the gradient.
    live_positions: Vec<usize>,
    k: usize,
    l_rr: usize,
}

/// Drive the active party over `ch` until training completes.
pub fn run_bob(
    features: &DenseMatrix,
    labels: &DenseVector,
    d_alice: usize,
    cfg: &TrainConfig,
    ch: &mut dyn Channel,
) -> Result<BobOutcome> {
    let n_train = labels.len();
    if features.rows() != n_train {
        return Err(Error::dimension("active party features/labels mismatch"));
    }
    let mut batch_rng = RngStream::derive(cfg.seed, PARTY_BOB, "batch");
    let mut noise_rng = RngStream::derive(cfg.seed, PARTY_BOB, "noise");
    let mut crypto_s = 0.0f64;

    let keys: Option<(PublicKey, PrivateKey, FixedPointCodec)> = if cfg.defense.uses_encryption() {
        let mut key_rng = RngStream::derive(cfg.seed, PARTY_BOB, "keygen");
        let t = Instant::now();
        let (pk, sk) = keygen(cfg.key_bits, &mut key_rng)?;
        crypto_s += t.elapsed().as_secs_f64();
        let codec = FixedPointCodec::new(cfg.fixed_point_scale, &pk)?;
        send_message(
            ch,
            &ProtocolMessage {
                round: 0,
                sender: Sender::Bob,
                body: MessageBody::PublicKeyMsg {
                    n: pk.modulus().clone(),
                    fp_scale: cfg.fixed_point_scale,
                },
            },
        )?;
        Some((pk, sk, codec))
    } else {
        None
    };

    let rounds_per_epoch = cfg.rounds_per_epoch(n_train);
    let total_rounds = cfg.total_rounds(n_train);
    let mut w = DenseVector::zeros(features.cols());
    let mut per_epoch_loss = vec![0.0f64; cfg.epochs];
    let mut round_logs = Vec::with_capacity(total_rounds);
    let mut round_timings = Vec::with_capacity(total_rounds);

    for round in 0..total_rounds as u32 {
        let round_started = Instant::now();

        let plan = match cfg.defense {
            Defense::Hybrid { epsilon, q, s_size } => {
                let rr = RRParams::new(epsilon)?;
                let state = draw_hybrid_round_state(
                    n_train,
                    s_size,
                    q,
                    &rr,
                    d_alice,
                    &mut batch_rng,
                    &mut noise_rng,
                )?;
                let forwarded: Vec<u32> = (0..s_size)
                    .filter(|&i| state.rr_m[i])
                    .map(|i| state.s_indices[i])
                    .collect();
                // Positions of the true batch within the forwarded list.
                let mut live_positions = Vec::with_capacity(state.k);
                let mut cursor = 0usize;
                for i in 0..s_size {
                    if state.rr_m[i] {
                        if state.m[i] {
                            live_positions.push(cursor);
                        }
                        cursor += 1;
                    }
                }
                BobRoundPlan {
                    announced: state.s_indices.clone(),
                    rr_mask: state.rr_m.clone(),
                    forwarded,
                    live_positions,
                    k: state.k,
                    l_rr: state.l_rr,
                }
            }
            _ => {
                let batch = sample_batch(&mut batch_rng, n_train, cfg.batch_size);
                let len = batch.len();
                BobRoundPlan {
                    announced: batch.clone(),
                    rr_mask: vec![true; len],
                    forwarded: batch,
                    live_positions: (0..len).collect(),
                    k: len,
                    l_rr: len,
                }
            }
        };

        send_message(
            ch,
            &ProtocolMessage {
                round,
                sender: Sender::Bob,
                body: MessageBody::BatchAnnounce {
                    rr_mask: plan.rr_mask.clone(),
                    indices: plan.announced.clone(),
                },
            },
        )?;

        let lin_pred = expect_message(ch, round, kind::PARTIAL_LIN_PRED, Sender::Alice)?;
        let l_alice = match lin_pred.body {
            MessageBody::PartialLinPred { values } => values,
            _ => unreachable!("kind checked"),
        };
        if l_alice.len() != plan.forwarded.len() {
            return Err(Error::protocol(format!(
                "round {round}: expected {} partial predictions, got {}",
                plan.forwarded.len(),
                l_alice.len()
            )));
        }

        // Combine partial predictions and compute residues over forwarded rows.
        let fwd_rows: Vec<usize> = plan.forwarded.iter().map(|&i| i as usize).collect();
        let mut logits = Vec::with_capacity(fwd_rows.len());
        for (pos, &row) in fwd_rows.iter().enumerate() {
            let own: f64 = features
                .row(row)
                .iter()
                .zip(w.iter())
                .map(|(a, b)| a * b)
                .sum();
            logits.push(l_alice[pos] + own);
        }
        let residues: Vec<f64> = fwd_rows
            .iter()
            .zip(&logits)
            .map(|(&row, &z)| labels.get(row) - sigmoid(z))
            .collect();

        let denom = if cfg.normalize_by_k {
            plan.k
        } else {
            plan.l_rr
        };

        // Loss over the samples that drive this round's gradient.
        let live_logits =
            DenseVector::new(plan.live_positions.iter().map(|&p| logits[p]).collect())?;
        let live_labels = DenseVector::new(
            plan.live_positions
                .iter()
                .map(|&p| labels.get(fwd_rows[p]))
                .collect(),
        )?;
        let loss = logistic_loss_logits(&live_logits, &live_labels, &w, 0.0)?;
        per_epoch_loss[round as usize / rounds_per_epoch] += loss;

        // Local parameter update from true residues over the live samples.
        if features.cols() > 0 && cfg.learning_rate > 0.0 {
            let mut sums = vec![0.0f64; features.cols()];
            for &p in &plan.live_positions {
                let r = residues[p];
                for (s, x) in sums.iter_mut().zip(features.row(fwd_rows[p])) {
                    *s += r * x;
                }
            }
            for (wj, sum) in w.data_mut().iter_mut().zip(&sums) {
                let g = -sum / denom as f64 + 2.0 * cfg.lambda * *wj;
                *wj -= cfg.learning_rate * g;
            }
        }

        // Outbound residues.
        match cfg.defense {
            Defense::None | Defense::Hybrid { .. } => {
                let (pk, sk, codec) = keys.as_ref().expect("encrypted path has keys");
                // Hybrid sends zeros outside the true batch; with
                // normalize_by_k the live residues are pre-scaled by
                // L_RR / k so the receiver's 1/L_RR normalization nets to
                // the true-batch mini-batch gradient.
                let mut outbound = vec![0.0f64; residues.len()];
                let factor = if matches!(cfg.defense, Defense::Hybrid { .. }) && cfg.normalize_by_k
                {
                    plan.l_rr as f64 / plan.k as f64
                } else {
                    1.0
                };
                for &p in &plan.live_positions {
                    outbound[p] = residues[p] * factor;
                }
                let t = Instant::now();
                let mut ciphertexts = Vec::with_capacity(outbound.len());
                for &value in &outbound {
                    let m = codec.encode(value)?;
                    ciphertexts.push(encrypt(pk, &m, &mut noise_rng)?.value().clone());
                }
                crypto_s += t.elapsed().as_secs_f64();
                send_message(
                    ch,
                    &ProtocolMessage {
                        round,
                        sender: Sender::Bob,
                        body: MessageBody::EncResidues { ciphertexts },
                    },
                )?;

                let masked = expect_message(ch, round, kind::MASKED_ENC_GRADIENT, Sender::Alice)?;
                let ciphers = match masked.body {
                    MessageBody::MaskedEncGradient { ciphertexts } => ciphertexts,
                    _ => unreachable!("kind checked"),
                };
                if ciphers.len() != d_alice {
                    return Err(Error::protocol(format!(
                        "round {round}: masked gradient has {} entries, expected {d_alice}",
                        ciphers.len()
                    )));
                }
                let t = Instant::now();
                let values: Vec<BigInt> = ciphers
                    .into_iter()
                    .map(|c| {
                        let ring = decrypt(pk, sk, &Ciphertext::from_value(c));
                        codec.int_from_ring(&ring)
                    })
                    .collect();
                crypto_s += t.elapsed().as_secs_f64();
                send_message(
                    ch,
                    &ProtocolMessage {
                        round,
                        sender: Sender::Bob,
                        body: MessageBody::DecMaskedGradient { values },
                    },
                )?;
            }
            Defense::Add { epsilon } => {
                let params = AddNoiseParams::new(epsilon)?;
                let values: Vec<f64> = residues
                    .iter()
                    .map(|&r| mechanisms::m_add(r, &params, &mut noise_rng))
                    .collect();
                send_message(
                    ch,
                    &ProtocolMessage {
                        round,
                        sender: Sender::Bob,
                        body: MessageBody::PlainNoisedResidues { values },
                    },
                )?;
            }
            Defense::Mult {
                epsilon,
                b1,
                b2,
                clip_mode,
            } => {
                let params = MultNoiseParams::new(epsilon, b1, b2)?.with_clip_mode(clip_mode);
                let values: Vec<f64> = residues
                    .iter()
                    .map(|&r| mechanisms::m_mult(r, &params, &mut noise_rng))
                    .collect();
                send_message(
                    ch,
                    &ProtocolMessage {
                        round,
                        sender: Sender::Bob,
                        body: MessageBody::PlainNoisedResidues { values },
                    },
                )?;
            }
        }

        round_logs.push(RoundLog {
            round,
            announced: plan.announced,
            forwarded: plan.forwarded.clone(),
            true_batch: plan
                .live_positions
                .iter()
                .map(|&p| plan.forwarded[p])
                .collect(),
            k: plan.k,
            l_rr: plan.l_rr,
            denom,
            true_residues: residues,
            loss,
        });
        round_timings.push(RoundTiming {
            round,
            seconds: round_started.elapsed().as_secs_f64(),
        });
    }

    for loss in per_epoch_loss.iter_mut() {
        *loss /= rounds_per_epoch as f64;
    }
    Ok(BobOutcome {
        w,
        per_epoch_loss,
        round_logs,
        round_timings,
        crypto_s,
    })
}

/// Drive the passive party over `ch` until training completes.
pub fn run_alice(
    features: &DenseMatrix,
    cfg: &TrainConfig,
    ch: &mut dyn Channel,
) -> Result<AliceOutcome> {
    let d_alice = features.cols();
    let n_train = features.rows();
    let mut mask_rng = RngStream::derive(cfg.seed, PARTY_ALICE, "mask");
    let mut crypto_s = 0.0f64;
    let mut transcript = Transcript::default();

    let pk_and_codec: Option<(PublicKey, FixedPointCodec)> = if cfg.defense.uses_encryption() {
        let msg = expect_message(ch, 0, kind::PUBLIC_KEY, Sender::Bob)?;
        let (n, fp_scale) = match &msg.body {
            MessageBody::PublicKeyMsg { n, fp_scale } => (n.clone(), *fp_scale),
            _ => unreachable!("kind checked"),
        };
        transcript.messages.push(msg);
        let pk = PublicKey::from_modulus(n);
        let codec = FixedPointCodec::new(fp_scale, &pk)?;
        Some((pk, codec))
    } else {
        None
    };

    let total_rounds = cfg.total_rounds(n_train);
    let mut w = DenseVector::zeros(d_alice);

    for round in 0..total_rounds as u32 {
        let announce = expect_message(ch, round, kind::BATCH_ANNOUNCE, Sender::Bob)?;
        let (rr_mask, indices) = match &announce.body {
            MessageBody::BatchAnnounce { rr_mask, indices } => (rr_mask.clone(), indices.clone()),
            _ => unreachable!("kind checked"),
        };
        transcript.messages.push(announce);
        if rr_mask.len() != indices.len() {
            return Err(Error::protocol("announce mask/indices length mismatch"));
        }
        let forwarded: Vec<usize> = indices
            .iter()
            .zip(&rr_mask)
            .filter(|(_, &keep)| keep)
            .map(|(&i, _)| i as usize)
            .collect();
        if forwarded.iter().any(|&i| i >= n_train) {
            return Err(Error::protocol("announced sample index out of range"));
        }

        let values: Vec<f64> = forwarded
            .iter()
            .map(|&row| {
                features
                    .row(row)
                    .iter()
                    .zip(w.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let reply = ProtocolMessage {
            round,
            sender: Sender::Alice,
            body: MessageBody::PartialLinPred { values },
        };
        transcript.messages.push(reply.clone());
        send_message(ch, &reply)?;

        if let Some((pk, codec)) = pk_and_codec.as_ref() {
            let enc = expect_message(ch, round, kind::ENC_RESIDUES, Sender::Bob)?;
            let ciphertexts = match &enc.body {
                MessageBody::EncResidues { ciphertexts } => ciphertexts.clone(),
                _ => unreachable!("kind checked"),
            };
            transcript.messages.push(enc);
            if ciphertexts.len() != forwarded.len() {
                return Err(Error::protocol(format!(
                    "round {round}: {} encrypted residues for {} forwarded samples",
                    ciphertexts.len(),
                    forwarded.len()
                )));
            }
            let residue_ciphers: Vec<Ciphertext> = ciphertexts
                .into_iter()
                .map(Ciphertext::from_value)
                .collect();

            // Accumulate <t_j> = sum_i x[i][j] * <rho_i> homomorphically,
            // then add the mask xi_j before anything leaves this side.
            let t = Instant::now();
            let mut masks = Vec::with_capacity(d_alice);
            let mut out_ciphers = Vec::with_capacity(d_alice);
            let scale = codec.scale();
            let mask_range = (1u64 << (MASK_RANGE_BITS + 1)) * scale;
            for j in 0..d_alice {
                let mut acc = crate::paillier::trivial_zero(pk);
                for (pos, &row) in forwarded.iter().enumerate() {
                    let coeff = BigInt::from(codec.encode_int(features.get(row, j))?);
                    let term = scalar_mult(pk, &coeff, &residue_ciphers[pos])?;
                    acc = add_cipher(pk, &acc, &term);
                }
                // Mask: uniform fixed-point real in [-2^16, 2^16) lifted to
                // the scale^2 domain of the accumulated products.
                let draw = mask_rng.below(mask_range) as i128
                    - ((1u64 << MASK_RANGE_BITS) * scale) as i128;
                let lifted = BigInt::from(draw) * BigInt::from(scale);
                let mask_cipher = encrypt(pk, &codec.ring_from_int(&lifted)?, &mut mask_rng)?;
                acc = add_cipher(pk, &acc, &mask_cipher);
                masks.push(lifted);
                out_ciphers.push(acc.value().clone());
            }
            crypto_s += t.elapsed().as_secs_f64();

            let reply = ProtocolMessage {
                round,
                sender: Sender::Alice,
                body: MessageBody::MaskedEncGradient {
                    ciphertexts: out_ciphers,
                },
            };
            transcript.messages.push(reply.clone());
            send_message(ch, &reply)?;
            transcript.alice_masks.push(MaskRecord {
                round,
                masks: masks.clone(),
            });

            let dec = expect_message(ch, round, kind::DEC_MASKED_GRADIENT, Sender::Bob)?;
            let values = match &dec.body {
                MessageBody::DecMaskedGradient { values } => values.clone(),
                _ => unreachable!("kind checked"),
            };
            transcript.messages.push(dec);
            if values.len() != d_alice {
                return Err(Error::protocol("decrypted gradient width mismatch"));
            }
            if cfg.learning_rate > 0.0 {
                let denom = forwarded.len() as f64;
                let scale_sq = (scale as f64) * (scale as f64);
                for (j, wj) in w.data_mut().iter_mut().enumerate() {
                    let unmasked = &values[j] - &masks[j];
                    let sum = unmasked.to_f64().unwrap_or(f64::INFINITY) / scale_sq;
                    let g = -sum / denom + 2.0 * cfg.lambda * *wj;
                    *wj -= cfg.learning_rate * g;
                }
            }
        } else {
            let plain = expect_message(ch, round, kind::PLAIN_NOISED_RESIDUES, Sender::Bob)?;
            let values = match &plain.body {
                MessageBody::PlainNoisedResidues { values } => values.clone(),
                _ => unreachable!("kind checked"),
            };
            transcript.messages.push(plain);
            if values.len() != forwarded.len() {
                return Err(Error::protocol("noised residue count mismatch"));
            }
            if cfg.learning_rate > 0.0 && d_alice > 0 {
                let mut sums = vec![0.0f64; d_alice];
                for (pos, &row) in forwarded.iter().enumerate() {
                    for (s, x) in sums.iter_mut().zip(features.row(row)) {
                        *s += values[pos] * x;
                    }
                }
                let denom = forwarded.len() as f64;
                for (wj, sum) in w.data_mut().iter_mut().zip(&sums) {
                    let g = -sum / denom + 2.0 * cfg.lambda * *wj;
                    *wj -= cfg.learning_rate * g;
                }
            }
        }
    }

    Ok(AliceOutcome {
        w,
        transcript,
        crypto_s,
    })
}
