//! The two-party training engine.
//!
//! Bob (active party) holds labels and his feature block; Alice (passive
//! party) holds hers. Four training paths share one engine:
//!
//! - baseline: residues travel encrypted, Alice accumulates her gradient
//!   homomorphically, masks it, Bob decrypts, Alice unmasks;
//! - `add` / `mult`: residues travel in plaintext after an LDP mechanism,
//!   no cryptography anywhere;
//! - hybrid: Bob announces an oversampled subset with a randomized-response
//!   obscured indicator; only a hidden true batch carries real residues, the
//!   rest are encrypted zeros.
//!
//! Parties run as sequential state machines connected by an ordered byte
//! channel; the passive party's view of the run is captured as a
//! [`Transcript`](crate::message::Transcript).

mod centralized;
mod channel;
mod engine;

pub use centralized::{centralized_train, centralized_train_on_batches, sample_batch};
pub use channel::{in_process_pair, Channel, InProcessChannel, TcpChannel};
pub use engine::{run_alice, run_bob, AliceOutcome, BobOutcome};

use serde::{Deserialize, Serialize};

use crate::data::VerticalSplit;
use crate::error::{Error, Result};
use crate::mechanisms::{AddNoiseParams, ClipMode, MultNoiseParams, RRParams};
use crate::message::Transcript;
use crate::numeric::{DenseMatrix, DenseVector};
use crate::paillier::SUPPORTED_KEY_BITS;
use crate::rng::RngStream;

/// Residue protection selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defense {
    None,
    Add {
        epsilon: f64,
    },
    Mult {
        epsilon: f64,
        b1: f64,
        b2: f64,
        #[serde(default)]
        clip_mode: ClipMode,
    },
    Hybrid {
        epsilon: f64,
        q: f64,
        s_size: usize,
    },
}

impl Defense {
    /// Whether this path uses homomorphic encryption.
    pub fn uses_encryption(&self) -> bool {
        matches!(self, Defense::None | Defense::Hybrid { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Defense::None => "none",
            Defense::Add { .. } => "add",
            Defense::Mult { .. } => "mult",
            Defense::Hybrid { .. } => "hybrid",
        }
    }
}

/// Hyperparameters and protocol knobs for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size for the baseline/LDP paths and the centralized oracle.
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub defense: Defense,
    pub key_bits: usize,
    /// Hybrid only: divide by the realized true-batch size `k` instead of the
    /// forwarded count, making each round's gradient identical to the
    /// centralized mini-batch gradient over the true batch.
    pub normalize_by_k: bool,
    /// Fixed-point scale for the encrypted paths.
    pub fixed_point_scale: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 16,
            lambda: 0.0,
            seed: 42,
            defense: Defense::None,
            key_bits: 2048,
            normalize_by_k: true,
            fixed_point_scale: crate::paillier::DEFAULT_SCALE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, d_alice: usize, n_train: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and >= 0"));
        }
        if self.lambda < 0.0 {
            return Err(Error::config("lambda must be >= 0"));
        }
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::config(format!(
                "batch size {} out of range (1..={n_train})",
                self.batch_size
            )));
        }
        if self.fixed_point_scale == 0 || self.fixed_point_scale > 1_000_000_000_000 {
            return Err(Error::config("fixed-point scale out of range"));
        }
        if self.defense.uses_encryption() && !SUPPORTED_KEY_BITS.contains(&self.key_bits) {
            return Err(Error::config(format!(
                "unsupported key length {}; expected one of {SUPPORTED_KEY_BITS:?}",
                self.key_bits
            )));
        }
        match self.defense {
            Defense::None => {}
            Defense::Add { epsilon } => {
                AddNoiseParams::new(epsilon)?;
            }
            Defense::Mult {
                epsilon,
                b1,
                b2,
                clip_mode,
            } => {
                MultNoiseParams::new(epsilon, b1, b2)?.with_clip_mode(clip_mode);
            }
            Defense::Hybrid { epsilon, q, s_size } => {
                let rr = RRParams::new(epsilon)?;
                if !(q > 0.0 && q < 0.5) {
                    return Err(Error::config("hybrid q must lie in (0, 1/2)"));
                }
                if s_size == 0 || s_size > n_train {
                    return Err(Error::config(format!(
                        "hybrid s_size {s_size} out of range (1..={n_train})"
                    )));
                }
                let ones = (q * s_size as f64).round() as usize;
                if ones == 0 {
                    return Err(Error::config(
                        "hybrid q * s_size rounds to zero indicator ones",
                    ));
                }
                // Feasibility of d_alice < L_RR < |S| in expectation.
                let expected = expected_l_rr(q, s_size, rr.keep_probability());
                if expected <= d_alice as f64 || expected >= s_size as f64 {
                    return Err(Error::config(format!(
                        "hybrid parameters infeasible: expected forwarded count {expected:.1} \
                         must exceed d_alice = {d_alice} and stay below s_size = {s_size}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rounds per epoch: one epoch covers the training set once at the
    /// announced-set granularity.
    pub fn rounds_per_epoch(&self, n_train: usize) -> usize {
        let unit = match self.defense {
            Defense::Hybrid { s_size, .. } => s_size,
            _ => self.batch_size,
        };
        n_train.div_ceil(unit).max(1)
    }

    pub fn total_rounds(&self, n_train: usize) -> usize {
        self.epochs * self.rounds_per_epoch(n_train)
    }
}

/// Expected number of ones in the obscured indicator:
/// `q |S| p + (1-q) |S| (1-p)`.
pub fn expected_l_rr(q: f64, s_size: usize, keep_probability: f64) -> f64 {
    let s = s_size as f64;
    q * s * keep_probability + (1.0 - q) * s * (1.0 - keep_probability)
}

/// One round's private state on Bob's side of the hybrid protocol.
#[derive(Debug, Clone)]
pub struct HybridRoundState {
    /// Announced sample indices (|S| of them).
    pub s_indices: Vec<u32>,
    /// Bob's private indicator over `s_indices`.
    pub m: Vec<bool>,
    /// Indicator after randomized response; this is what Alice sees.
    pub rr_m: Vec<bool>,
    /// Positions within `s_indices` where both `m` and `rr_m` are set.
    pub true_batch: Vec<usize>,
    pub k: usize,
    pub l_rr: usize,
}

/// Redraw cap for rounds whose realized indicator violates the
/// `d_alice < L_RR < |S|` requirement (or draws an empty true batch).
pub const HYBRID_REDRAW_LIMIT: usize = 100;

/// Draw one hybrid round: announced subset, indicator, randomized response.
/// Rejected draws are redrawn whole, up to [`HYBRID_REDRAW_LIMIT`] times.
pub fn draw_hybrid_round_state(
    n_train: usize,
    s_size: usize,
    q: f64,
    rr: &RRParams,
    d_alice: usize,
    batch_rng: &mut RngStream,
    noise_rng: &mut RngStream,
) -> Result<HybridRoundState> {
    let ones = (q * s_size as f64).round() as usize;
    for _ in 0..HYBRID_REDRAW_LIMIT {
        let s_indices = batch_rng.sample_indices(n_train, s_size);
        let mut m = vec![false; s_size];
        for pos in batch_rng.sample_indices(s_size, ones) {
            m[pos as usize] = true;
        }
        let rr_m = crate::mechanisms::random_response(&m, rr, noise_rng);
        let l_rr = rr_m.iter().filter(|&&b| b).count();
        let true_batch: Vec<usize> = (0..s_size).filter(|&i| m[i] && rr_m[i]).collect();
        let k = true_batch.len();
        if l_rr > d_alice && l_rr < s_size && k >= 1 {
            return Ok(HybridRoundState {
                s_indices,
                m,
                rr_m,
                true_batch,
                k,
                l_rr,
            });
        }
    }
    Err(Error::protocol(format!(
        "hybrid round rejected {HYBRID_REDRAW_LIMIT} times; parameters leave \
         d_alice < L_RR < |S| (with k >= 1) too unlikely"
    )))
}

/// Bob's private log of one round, enough to replay the run against oracles.
#[derive(Debug, Clone)]
pub struct RoundLog {
    pub round: u32,
    /// Announced sample indices (the batch, or S for hybrid).
    pub announced: Vec<u32>,
    /// Samples both parties computed predictions for.
    pub forwarded: Vec<u32>,
    /// Samples whose residues actually drove the gradient.
    pub true_batch: Vec<u32>,
    pub k: usize,
    pub l_rr: usize,
    /// Effective gradient denominator.
    pub denom: usize,
    /// True residues, aligned with `forwarded`.
    pub true_residues: Vec<f64>,
    /// Training loss over `true_batch` at the round's start.
    pub loss: f64,
}

/// Wall-clock breakdown of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub total_s: f64,
    /// Time inside key generation, encryption, decryption and homomorphic
    /// operations, both parties combined.
    pub crypto_s: f64,
    /// Time spent encoding and writing messages into the channel, both
    /// parties combined (blocking waits for the peer are excluded).
    pub channel_s: f64,
}

/// Everything a finished run yields.
#[derive(Debug)]
pub struct RunOutput {
    pub w_alice: DenseVector,
    pub w_bob: DenseVector,
    pub transcript: Transcript,
    pub per_epoch_loss: Vec<f64>,
    pub round_logs: Vec<RoundLog>,
    pub timings: RunTimings,
}

fn run_protocol(split: &VerticalSplit, cfg: &TrainConfig) -> Result<RunOutput> {
    cfg.validate(split.d_alice, split.alice.rows().min(split.labels.len()))?;
    if split.alice.rows() != split.labels.len() || split.bob.rows() != split.labels.len() {
        return Err(Error::dimension("party sample counts are not aligned"));
    }
    let labels = split.labels_vector();
    let started = std::time::Instant::now();

    let (mut ch_bob, mut ch_alice) = in_process_pair();
    let (bob_out, alice_out) = std::thread::scope(|scope| -> Result<(BobOutcome, AliceOutcome)> {
        let bob_handle =
            scope.spawn(|| run_bob(&split.bob, &labels, split.d_alice, cfg, &mut ch_bob));
        let alice_out = run_alice(&split.alice, cfg, &mut ch_alice);
        let bob_out = bob_handle
            .join()
            .map_err(|_| Error::protocol("active party thread panicked"))?;
        Ok((bob_out?, alice_out?))
    })?;

    let timings = RunTimings {
        total_s: started.elapsed().as_secs_f64(),
        crypto_s: bob_out.crypto_s + alice_out.crypto_s,
        channel_s: ch_bob.send_seconds() + ch_alice.send_seconds(),
    };
    let mut transcript = alice_out.transcript;
    transcript.round_timings = bob_out.round_timings;
    Ok(RunOutput {
        w_alice: alice_out.w,
        w_bob: bob_out.w,
        transcript,
        per_epoch_loss: bob_out.per_epoch_loss,
        round_logs: bob_out.round_logs,
        timings,
    })
}

/// Run the baseline encrypted-residue protocol (`Defense::None`).
pub fn run_baseline(split: &VerticalSplit, cfg: &TrainConfig) -> Result<RunOutput> {
    if cfg.defense != Defense::None {
        return Err(Error::config("run_baseline requires defense = none"));
    }
    run_protocol(split, cfg)
}

/// Run the plaintext LDP protocol (`Defense::Add` or `Defense::Mult`).
pub fn run_ldp(split: &VerticalSplit, cfg: &TrainConfig) -> Result<RunOutput> {
    if !matches!(cfg.defense, Defense::Add { .. } | Defense::Mult { .. }) {
        return Err(Error::config("run_ldp requires defense = add or mult"));
    }
    run_protocol(split, cfg)
}

/// Run the randomized-response + encryption hybrid protocol.
pub fn run_hybrid(split: &VerticalSplit, cfg: &TrainConfig) -> Result<RunOutput> {
    if !matches!(cfg.defense, Defense::Hybrid { .. }) {
        return Err(Error::config("run_hybrid requires defense = hybrid"));
    }
    run_protocol(split, cfg)
}

/// Dispatch on the configured defense.
pub fn run(split: &VerticalSplit, cfg: &TrainConfig) -> Result<RunOutput> {
    run_protocol(split, cfg)
}

/// Join a vertical split back into one feature matrix (test/metric helper).
pub fn join_features(split: &VerticalSplit) -> Result<DenseMatrix> {
    let n = split.labels.len();
    let d = split.alice.cols() + split.bob.cols();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend_from_slice(split.alice.row(i));
        data.extend_from_slice(split.bob.row(i));
    }
    DenseMatrix::new(n, d, data)
}

/// Joint prediction scores for a feature matrix under the two parties' final
/// parameters (Alice's weights apply to the first `d_alice` columns).
pub fn joint_scores(
    x: &DenseMatrix,
    w_alice: &DenseVector,
    w_bob: &DenseVector,
) -> Result<DenseVector> {
    let d_alice = w_alice.len();
    if x.cols() != d_alice + w_bob.len() {
        return Err(Error::dimension("joint_scores: width mismatch"));
    }
    let mut scores = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut z = 0.0;
        for (v, w) in row[..d_alice].iter().zip(w_alice.iter()) {
            z += v * w;
        }
        for (v, w) in row[d_alice..].iter().zip(w_bob.iter()) {
            z += v * w;
        }
        scores.push(crate::numeric::sigmoid(z));
    }
    DenseVector::new(scores)
}
