//! The passive party's label-inference engine.
//!
//! From her own transcript of a run, Alice reconstructs per round the linear
//! system relating her feature block to the gradient she received: each
//! feature contributes one equation `sum_i x_ij * rho_i = t_j` over the
//! residues `rho`. When the system has a unique solution — which happens
//! exactly when she has at least as many features as there were unknown
//! residues — the residue signs hand her the labels.
//!
//! On the encrypted paths the reconstruction happens in the fixed-point
//! domain the protocol itself used (Alice knows the public scale), so the
//! recovered residues match the sender's to within one quantization step. On
//! the plaintext LDP paths there is nothing to solve: the noised residues are
//! observed directly and the sign rule is applied to them as-is.
//!
//! When no round is recoverable the attack still has to commit to an answer;
//! it falls back to an uninformed constant guess (label 1), whose accuracy is
//! the positive base rate — chance level on balanced data.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::message::{MessageBody, Transcript};
use crate::numeric::{DenseMatrix, DenseVector};
use crate::solve::{solve_linear, SolveOutcome};

/// One round's reconstructed system, in the shape the solver consumes.
#[derive(Debug, Clone)]
pub struct AttackInput {
    /// Alice's feature rows for the round's forwarded samples (|B| x d_alice).
    pub x_a_batch: DenseMatrix,
    /// The per-feature gradient Alice received, after unmasking and
    /// normalization (length d_alice).
    pub g_a: DenseVector,
    /// The normalization the gradient carried (the forwarded count; known to
    /// Alice from the announced indices).
    pub batch_denom: usize,
}

/// Build `A x = b` with `A = (X^A_batch)^T` and `b = -denom * g_a`, undoing
/// the `-1/denom` factor the gradient path applied.
pub fn build_system(input: &AttackInput) -> Result<(DenseMatrix, DenseVector)> {
    if input.g_a.len() != input.x_a_batch.cols() {
        return Err(Error::dimension("gradient length must equal feature count"));
    }
    let a = input.x_a_batch.transpose();
    let b = DenseVector::new(
        input
            .g_a
            .iter()
            .map(|&g| -(input.batch_denom as f64) * g)
            .collect(),
    )?;
    Ok((a, b))
}

/// True iff the system has one and only one solution: numerical
/// rank(A) = rank([A|b]) = number of unknowns.
pub fn check_recoverable(a: &DenseMatrix, b: &DenseVector) -> Result<bool> {
    Ok(matches!(solve_linear(a, b)?, SolveOutcome::Unique(_)))
}

/// Sign rule: a positive residue means the label was 1, a negative one 0.
/// (An exact zero cannot arise analytically; a numeric zero maps to 1.)
pub fn infer_labels(residues: &DenseVector) -> Vec<u8> {
    residues.iter().map(|&r| u8::from(r >= 0.0)).collect()
}

/// Exact search cost `L (L+1) 2^(L-2)` of enumerating every candidate batch
/// size and batch among `l_rr` forwarded samples (1 when `l_rr` = 1).
pub fn hybrid_search_cost(l_rr: u64) -> BigUint {
    match l_rr {
        0 => BigUint::default(),
        1 => BigUint::one(),
        l => (BigUint::from(l) * BigUint::from(l + 1)) << (l - 2),
    }
}

/// Brute-force demonstrator of that search: try every subset of the
/// forwarded samples as the candidate true batch and keep those whose
/// subsystem is uniquely consistent with `b`. Capped at 12 unknowns; the
/// point of the cost formula is that real sizes are far beyond reach.
pub fn brute_force_true_batch(
    a: &DenseMatrix,
    b: &DenseVector,
) -> Result<Vec<(Vec<usize>, DenseVector)>> {
    let l = a.cols();
    if l > 12 {
        return Err(Error::domain(format!(
            "brute-force demonstrator capped at 12 unknowns, got {l}"
        )));
    }
    let a_t = a.transpose();
    let mut candidates = Vec::new();
    for mask in 1u32..(1 << l) {
        let subset: Vec<usize> = (0..l).filter(|&i| mask >> i & 1 == 1).collect();
        let sub_a = a_t.select_rows(&subset)?.transpose();
        if let SolveOutcome::Unique(x) = solve_linear(&sub_a, b)? {
            // Residual check: outcome Unique only certifies rank; demand the
            // subsystem actually reproduces b.
            let mut reconstructed = sub_a.matvec(&x)?;
            reconstructed.add_scaled(-1.0, b)?;
            if reconstructed.norm2() <= 1e-8 * b.norm2().max(1.0) {
                candidates.push((subset, x));
            }
        }
    }
    Ok(candidates)
}

/// One round's attack outcome.
#[derive(Debug, Clone)]
pub struct RoundAttack {
    pub round: u32,
    /// Forwarded sample indices, aligned with `residue_estimates`.
    pub sample_indices: Vec<u32>,
    /// Unique solution found (encrypted paths) or residues observed directly
    /// (plaintext LDP paths).
    pub recoverable: bool,
    pub residue_estimates: Option<DenseVector>,
}

/// Aggregated attack result over a whole transcript.
#[derive(Debug, Clone)]
pub struct AttackReport {
    /// True iff at least one round yielded residues.
    pub recoverable: bool,
    pub rounds: Vec<RoundAttack>,
    /// Majority-vote labels for samples covered by at least one recoverable
    /// round; absent when nothing was recoverable.
    pub inferred_labels: Option<BTreeMap<u32, u8>>,
    /// Labels the attacker commits to for every sample she saw: inferred
    /// where available, the constant fallback guess elsewhere.
    pub committed_labels: BTreeMap<u32, u8>,
    /// How many committed labels came from the fallback guess.
    pub fallback_count: usize,
    /// Fraction of committed labels matching ground truth (when supplied).
    pub success_rate: Option<f64>,
}

struct RoundView {
    announced: Option<(Vec<bool>, Vec<u32>)>,
    dec_masked: Option<Vec<num_bigint::BigInt>>,
    plain_residues: Option<Vec<f64>>,
}

/// Replay a transcript against Alice's feature matrix (full training rows;
/// announced indices index into it). `ground_truth`, when supplied, scores
/// the attack.
pub fn attack_transcript(
    transcript: &Transcript,
    alice_features: &DenseMatrix,
    ground_truth: Option<&[u8]>,
) -> Result<AttackReport> {
    let mut fp_scale: Option<u64> = None;
    let mut rounds: BTreeMap<u32, RoundView> = BTreeMap::new();
    for msg in &transcript.messages {
        let view = rounds.entry(msg.round).or_insert(RoundView {
            announced: None,
            dec_masked: None,
            plain_residues: None,
        });
        match &msg.body {
            MessageBody::PublicKeyMsg { fp_scale: s, .. } => fp_scale = Some(*s),
            MessageBody::BatchAnnounce { rr_mask, indices } => {
                view.announced = Some((rr_mask.clone(), indices.clone()));
            }
            MessageBody::DecMaskedGradient { values } => {
                view.dec_masked = Some(values.clone());
            }
            MessageBody::PlainNoisedResidues { values } => {
                view.plain_residues = Some(values.clone());
            }
            _ => {}
        }
    }

    let mut round_attacks = Vec::new();
    let mut votes: BTreeMap<u32, (usize, usize)> = BTreeMap::new(); // (zeros, ones)
    let mut seen: BTreeMap<u32, ()> = BTreeMap::new();

    for (&round, view) in &rounds {
        let (rr_mask, indices) = match &view.announced {
            Some(v) => v,
            // A public-key-only round group (round 0 header) has no batch.
            None if view.dec_masked.is_none() && view.plain_residues.is_none() => continue,
            None => return Err(Error::parse(format!("round {round}: no batch announce"))),
        };
        if rr_mask.len() != indices.len() {
            return Err(Error::parse("announce mask/indices length mismatch"));
        }
        let forwarded: Vec<u32> = indices
            .iter()
            .zip(rr_mask)
            .filter(|(_, &keep)| keep)
            .map(|(&i, _)| i)
            .collect();
        if forwarded
            .iter()
            .any(|&i| i as usize >= alice_features.rows())
        {
            return Err(Error::parse("announced index outside feature matrix"));
        }
        for &s in &forwarded {
            seen.insert(s, ());
        }

        let (recoverable, estimates) = if let Some(values) = &view.plain_residues {
            // LDP path: residues arrive in plaintext; nothing to solve.
            if values.len() != forwarded.len() {
                return Err(Error::parse("noised residue count mismatch"));
            }
            (true, Some(DenseVector::new(values.clone())?))
        } else if let Some(dec) = &view.dec_masked {
            let scale = fp_scale
                .ok_or_else(|| Error::parse("transcript has gradients but no public key"))?;
            let masks = transcript
                .mask_for_round(round)
                .ok_or_else(|| Error::parse(format!("round {round}: mask record missing")))?;
            if masks.masks.len() != dec.len() {
                return Err(Error::parse("mask/gradient width mismatch"));
            }
            let scale_f = scale as f64;
            let scale_sq = scale_f * scale_f;
            let denom = forwarded.len();
            // Unmask to the exact fixed-point sums, then present them as the
            // normalized gradient the protocol exposes.
            let g_a = DenseVector::new(
                dec.iter()
                    .zip(&masks.masks)
                    .map(|(v, m)| {
                        let t = (v - m).to_f64().unwrap_or(f64::INFINITY) / scale_sq;
                        -t / denom as f64
                    })
                    .collect(),
            )?;
            // Mirror the protocol's public quantization of the features so
            // the reconstructed system is the one that actually produced b.
            let mut quantized = Vec::with_capacity(forwarded.len() * alice_features.cols());
            for &i in &forwarded {
                for &x in alice_features.row(i as usize) {
                    quantized.push((x * scale_f).round() / scale_f);
                }
            }
            let x_a_batch = DenseMatrix::new(forwarded.len(), alice_features.cols(), quantized)?;
            let input = AttackInput {
                x_a_batch,
                g_a,
                batch_denom: denom,
            };
            let (a, b) = build_system(&input)?;
            match solve_linear(&a, &b)? {
                SolveOutcome::Unique(x) => (true, Some(x)),
                _ => (false, None),
            }
        } else {
            return Err(Error::parse(format!(
                "round {round}: no residue-bearing message"
            )));
        };

        if let Some(est) = &estimates {
            for (&sample, &bit) in forwarded.iter().zip(infer_labels(est).iter()) {
                let counts = votes.entry(sample).or_insert((0, 0));
                if bit == 1 {
                    counts.1 += 1;
                } else {
                    counts.0 += 1;
                }
            }
        }
        round_attacks.push(RoundAttack {
            round,
            sample_indices: forwarded,
            recoverable,
            residue_estimates: estimates,
        });
    }

    let inferred: BTreeMap<u32, u8> = votes
        .iter()
        .map(|(&sample, &(zeros, ones))| (sample, u8::from(ones >= zeros)))
        .collect();
    let recoverable = round_attacks.iter().any(|r| r.recoverable);

    let mut committed = BTreeMap::new();
    let mut fallback_count = 0usize;
    for &sample in seen.keys() {
        match inferred.get(&sample) {
            Some(&bit) => {
                committed.insert(sample, bit);
            }
            None => {
                committed.insert(sample, 1);
                fallback_count += 1;
            }
        }
    }

    let success_rate = ground_truth.map(|truth| {
        let mut hits = 0usize;
        let mut total = 0usize;
        for (&sample, &bit) in &committed {
            if let Some(&t) = truth.get(sample as usize) {
                total += 1;
                if t == bit {
                    hits += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    });

    Ok(AttackReport {
        recoverable,
        rounds: round_attacks,
        inferred_labels: if recoverable { Some(inferred) } else { None },
        committed_labels: committed,
        fallback_count,
        success_rate,
    })
}
