//! Centralized SGD on pooled features: the utility oracle every defense is
//! measured against.
//!
//! Batch selection uses the same stream derivation as the active party, so a
//! centralized run and a protocol run with equal seeds draw equal batch
//! sequences.

use crate::error::{Error, Result};
use crate::numeric::{logistic_loss_logits, sigmoid, DenseMatrix, DenseVector};
use crate::rng::{RngStream, PARTY_BOB};

use super::TrainConfig;

/// One round's batch: `batch_size` distinct indices in draw order.
pub fn sample_batch(rng: &mut RngStream, n: usize, batch_size: usize) -> Vec<u32> {
    rng.sample_indices(n, batch_size.min(n))
}

fn sgd_step(
    x: &DenseMatrix,
    y: &DenseVector,
    w: &mut DenseVector,
    batch: &[u32],
    denom: usize,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut logits = Vec::with_capacity(batch.len());
    let mut batch_labels = Vec::with_capacity(batch.len());
    for &i in batch {
        let row = x.row(i as usize);
        let z: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        logits.push(z);
        batch_labels.push(y.get(i as usize));
    }
    let loss = logistic_loss_logits(
        &DenseVector::from(logits.clone()),
        &DenseVector::from(batch_labels.clone()),
        w,
        0.0,
    )?;

    if cfg.learning_rate > 0.0 && x.cols() > 0 {
        let mut sums = vec![0.0f64; x.cols()];
        for (pos, &i) in batch.iter().enumerate() {
            let r = batch_labels[pos] - sigmoid(logits[pos]);
            for (s, v) in sums.iter_mut().zip(x.row(i as usize)) {
                *s += r * v;
            }
        }
        for (wj, sum) in w.data_mut().iter_mut().zip(&sums) {
            let g = -sum / denom as f64 + 2.0 * cfg.lambda * *wj;
            *wj -= cfg.learning_rate * g;
        }
    }
    Ok(loss)
}

/// Plain mini-batch SGD over the pooled dataset. Returns the final parameters
/// and the per-epoch mean batch loss.
pub fn centralized_train(
    x: &DenseMatrix,
    y: &DenseVector,
    cfg: &TrainConfig,
) -> Result<(DenseVector, Vec<f64>)> {
    if x.rows() != y.len() {
        return Err(Error::dimension("centralized: features/labels mismatch"));
    }
    let n = x.rows();
    let rounds_per_epoch = n.div_ceil(cfg.batch_size).max(1);
    let mut rng = RngStream::derive(cfg.seed, PARTY_BOB, "batch");
    let mut w = DenseVector::zeros(x.cols());
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut acc = 0.0;
        for _ in 0..rounds_per_epoch {
            let batch = sample_batch(&mut rng, n, cfg.batch_size);
            acc += sgd_step(x, y, &mut w, &batch, batch.len(), cfg)?;
        }
        per_epoch.push(acc / rounds_per_epoch as f64);
    }
    Ok((w, per_epoch))
}

/// SGD over an injected `(batch, denom)` sequence, one step per entry. The
/// oracle for protocol runs that log their realized batches.
pub fn centralized_train_on_batches(
    x: &DenseMatrix,
    y: &DenseVector,
    cfg: &TrainConfig,
    batches: &[(Vec<u32>, usize)],
) -> Result<DenseVector> {
    if x.rows() != y.len() {
        return Err(Error::dimension("centralized: features/labels mismatch"));
    }
    let mut w = DenseVector::zeros(x.cols());
    for (batch, denom) in batches {
        if *denom == 0 {
            return Err(Error::domain("batch denominator must be >= 1"));
        }
        sgd_step(x, y, &mut w, batch, *denom, cfg)?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth;

    #[test]
    fn learns_separable_data() {
        let ds = synth(200, 6, 10.0, 77).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let (w, losses) = centralized_train(&ds.x, &ds.labels_vector(), &cfg).unwrap();
        let scores = DenseVector::from(
            (0..ds.n_samples())
                .map(|i| {
                    sigmoid(
                        ds.x.row(i)
                            .iter()
                            .zip(w.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>(),
                    )
                })
                .collect::<Vec<_>>(),
        );
        let acc = crate::numeric::accuracy(&scores, &ds.labels_vector(), 0.5).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
        assert!(losses.last().unwrap() < &0.1);
    }

    #[test]
    fn inseparable_data_stays_at_chance() {
        let ds = synth(400, 4, 0.0, 78).unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let (w, _) = centralized_train(&ds.x, &ds.labels_vector(), &cfg).unwrap();
        let scores = DenseVector::from(
            (0..ds.n_samples())
                .map(|i| {
                    sigmoid(
                        ds.x.row(i)
                            .iter()
                            .zip(w.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>(),
                    )
                })
                .collect::<Vec<_>>(),
        );
        let acc = crate::numeric::accuracy(&scores, &ds.labels_vector(), 0.5).unwrap();
        assert!((acc - 0.5).abs() < 0.12, "accuracy {acc}");
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let ds = synth(50, 3, 2.0, 79).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (w, losses) = centralized_train(&ds.x, &ds.labels_vector(), &cfg).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        assert!(losses.is_empty());

        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let (w1, l1) = centralized_train(&ds.x, &ds.labels_vector(), &cfg).unwrap();
        let (w2, l2) = centralized_train(&ds.x, &ds.labels_vector(), &cfg).unwrap();
        assert_eq!(w1.data(), w2.data());
        assert_eq!(l1, l2);
    }

    #[test]
    fn injected_batches_reproduce_streamed_run() {
        let ds = synth(60, 4, 3.0, 80).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let y = ds.labels_vector();
        let (w_run, _) = centralized_train(&ds.x, &y, &cfg).unwrap();
        // Reconstruct the same batch sequence and replay it.
        let mut rng = RngStream::derive(cfg.seed, PARTY_BOB, "batch");
        let rounds = cfg.epochs * ds.n_samples().div_ceil(cfg.batch_size);
        let batches: Vec<(Vec<u32>, usize)> = (0..rounds)
            .map(|_| {
                let b = sample_batch(&mut rng, ds.n_samples(), cfg.batch_size);
                let len = b.len();
                (b, len)
            })
            .collect();
        let w_replay = centralized_train_on_batches(&ds.x, &y, &cfg, &batches).unwrap();
        assert_eq!(w_run.data(), w_replay.data());
    }
}
