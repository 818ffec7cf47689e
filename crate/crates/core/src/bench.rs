//! Experiment harness: one function from (dataset, config) to a full report,
//! plus the defense-comparison grid behind the bench command.

use serde::{Deserialize, Serialize};

use crate::attack::{attack_transcript, AttackReport};
use crate::data::{standardize, train_test_split, vertical_split, Dataset};
use crate::error::{Error, Result};
use crate::message::Transcript;
use crate::numeric::{evaluate, sigmoid, DenseVector, Metrics};
use crate::protocol::{centralized_train, joint_scores, run, RunTimings, TrainConfig};
use crate::report::{ConfigEcho, TrainReport, BENCH_REPORT_SCHEMA};

/// Classification threshold for reported accuracy.
pub const THRESHOLD: f64 = 0.5;
/// Test fraction used when none is given.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// One experiment: which data, how to split it, how to train.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dataset_name: String,
    pub label_column: String,
    pub d_alice: Option<usize>,
    pub test_fraction: f64,
    pub cfg: TrainConfig,
}

impl ExperimentSpec {
    pub fn new(dataset_name: impl Into<String>, cfg: TrainConfig) -> Self {
        ExperimentSpec {
            dataset_name: dataset_name.into(),
            label_column: "label".into(),
            d_alice: None,
            test_fraction: DEFAULT_TEST_FRACTION,
            cfg,
        }
    }
}

/// Everything a finished experiment yields (report plus replay artifacts).
pub struct ExperimentOutput {
    pub report: TrainReport,
    pub transcript: Option<Transcript>,
    pub attack: Option<AttackReport>,
    /// Alice's standardized training feature block (what the attack consumed).
    pub alice_train_features: crate::numeric::DenseMatrix,
    /// Training labels in row order (ground truth for the attack).
    pub train_labels: Vec<u8>,
}

/// Split, standardize, train under the configured defense, evaluate on the
/// held-out rows, and replay the attack against the transcript.
pub fn run_experiment(dataset: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let d = dataset.n_features();
    let d_alice = spec.d_alice.unwrap_or(d);
    if d_alice > d {
        return Err(Error::config(format!(
            "d_alice {d_alice} exceeds {d} features"
        )));
    }
    let (train_raw, test_raw) = train_test_split(dataset, spec.test_fraction, spec.cfg.seed)?;
    let (train, transform) = standardize(&train_raw)?;
    let test = transform.apply(&test_raw)?;
    let split = vertical_split(&train, d_alice)?;

    let out = run(&split, &spec.cfg)?;
    let w_joint: Vec<f64> = out
        .w_alice
        .iter()
        .chain(out.w_bob.iter())
        .copied()
        .collect();
    let scores = scores_for(&test, &w_joint);
    let metrics = evaluate(&scores, &test.labels_vector(), THRESHOLD)?;

    let attack = attack_transcript(&out.transcript, &split.alice, Some(&train.y))?;

    let report = TrainReport {
        schema: crate::report::TRAIN_REPORT_SCHEMA.to_string(),
        config: ConfigEcho {
            dataset: spec.dataset_name.clone(),
            label_column: spec.label_column.clone(),
            d_alice,
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            test_fraction: spec.test_fraction,
            train: spec.cfg.clone(),
        },
        per_epoch_loss: out.per_epoch_loss.clone(),
        final_metrics: Some(metrics),
        attack_success: attack.success_rate,
        timings: Some(out.timings),
    };
    Ok(ExperimentOutput {
        report,
        transcript: Some(out.transcript),
        attack: Some(attack),
        alice_train_features: split.alice.clone(),
        train_labels: train.y.clone(),
    })
}

/// Centralized analogue of [`run_experiment`]: same split and scaling, pooled
/// features, no protocol and no attack surface.
pub fn run_centralized_experiment(
    dataset: &Dataset,
    spec: &ExperimentSpec,
) -> Result<(TrainReport, Metrics)> {
    let (train_raw, test_raw) = train_test_split(dataset, spec.test_fraction, spec.cfg.seed)?;
    let (train, transform) = standardize(&train_raw)?;
    let test = transform.apply(&test_raw)?;

    let started = std::time::Instant::now();
    let (w, per_epoch_loss) = centralized_train(&train.x, &train.labels_vector(), &spec.cfg)?;
    let total_s = started.elapsed().as_secs_f64();

    let scores = scores_for(&test, w.data());
    let metrics = evaluate(&scores, &test.labels_vector(), THRESHOLD)?;
    let report = TrainReport {
        schema: crate::report::TRAIN_REPORT_SCHEMA.to_string(),
        config: ConfigEcho {
            dataset: spec.dataset_name.clone(),
            label_column: spec.label_column.clone(),
            d_alice: dataset.n_features(),
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            test_fraction: spec.test_fraction,
            train: spec.cfg.clone(),
        },
        per_epoch_loss,
        final_metrics: Some(metrics),
        attack_success: None,
        timings: Some(RunTimings {
            total_s,
            crypto_s: 0.0,
            channel_s: 0.0,
        }),
    };
    Ok((report, metrics))
}

fn scores_for(ds: &Dataset, w: &[f64]) -> DenseVector {
    DenseVector::from(
        (0..ds.n_samples())
            .map(|i| sigmoid(ds.x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>()))
            .collect::<Vec<_>>(),
    )
}

/// Joint prediction scores from the two parties' weight blocks.
pub fn joint_test_scores(
    test: &Dataset,
    w_alice: &DenseVector,
    w_bob: &DenseVector,
) -> Result<DenseVector> {
    joint_scores(&test.x, w_alice, w_bob)
}

/// One (defense, seed) cell of the comparison grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    pub defense: String,
    pub seed: u64,
    pub accuracy: f64,
    pub auc: f64,
    pub loss: f64,
    pub attack_success: Option<f64>,
    pub total_s: f64,
    pub crypto_s: f64,
    pub channel_s: f64,
}

/// Per-defense aggregate over seeds (mean and sample standard deviation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub defense: String,
    pub seeds: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub attack_success_mean: Option<f64>,
    pub total_s_mean: f64,
    pub total_s_std: f64,
    pub crypto_s_mean: f64,
    pub channel_s_mean: f64,
}

/// Comparison table across defenses, with the hybrid-to-baseline time ratio
/// when both rows are present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub dataset: String,
    pub cells: Vec<BenchCell>,
    pub rows: Vec<BenchRow>,
    pub hybrid_over_baseline_time: Option<f64>,
}

impl BenchReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::parse(format!("serialize bench: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: BenchReport =
            toml::from_str(text).map_err(|e| Error::parse(format!("parse bench: {e}")))?;
        if report.schema != BENCH_REPORT_SCHEMA {
            return Err(Error::parse(format!(
                "unsupported bench schema '{}'",
                report.schema
            )));
        }
        Ok(report)
    }

    /// Plain-text table for terminals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dataset: {}\n", self.dataset));
        out.push_str(&format!(
            "{:<12} {:>6} {:>9} {:>9} {:>9} {:>10} {:>10} {:>10}\n",
            "defense", "seeds", "acc", "auc", "attack", "total_s", "crypto_s", "chan_s"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>6} {:>9.4} {:>9.4} {:>9} {:>10.3} {:>10.3} {:>10.4}\n",
                row.defense,
                row.seeds,
                row.accuracy_mean,
                row.auc_mean,
                row.attack_success_mean
                    .map_or("-".to_string(), |v| format!("{v:.4}")),
                row.total_s_mean,
                row.crypto_s_mean,
                row.channel_s_mean,
            ));
        }
        if let Some(ratio) = self.hybrid_over_baseline_time {
            out.push_str(&format!("hybrid/baseline time ratio: {ratio:.2}\n"));
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run every (defense, seed) cell with otherwise matched configs and
/// aggregate. The defense named `centralized` trains on pooled data as the
/// utility reference; it never enters the time ratio.
pub fn run_bench(
    dataset: &Dataset,
    spec_template: &ExperimentSpec,
    defenses: &[(String, crate::protocol::Defense)],
    seeds: &[u64],
    centralized_row: bool,
) -> Result<BenchReport> {
    if seeds.is_empty() {
        return Err(Error::config("bench needs at least one seed"));
    }
    let mut cells = Vec::new();
    if centralized_row {
        for &seed in seeds {
            let mut spec = spec_template.clone();
            spec.cfg.seed = seed;
            let (report, metrics) = run_centralized_experiment(dataset, &spec)?;
            let t = report.timings.expect("centralized timings set");
            cells.push(BenchCell {
                defense: "centralized".into(),
                seed,
                accuracy: metrics.accuracy,
                auc: metrics.auc,
                loss: metrics.loss,
                attack_success: None,
                total_s: t.total_s,
                crypto_s: 0.0,
                channel_s: 0.0,
            });
        }
    }
    for (name, defense) in defenses {
        for &seed in seeds {
            let mut spec = spec_template.clone();
            spec.cfg.seed = seed;
            spec.cfg.defense = *defense;
            let out = run_experiment(dataset, &spec)?;
            let metrics = out.report.final_metrics.expect("metrics computed");
            let t = out.report.timings.expect("timings recorded");
            cells.push(BenchCell {
                defense: name.clone(),
                seed,
                accuracy: metrics.accuracy,
                auc: metrics.auc,
                loss: metrics.loss,
                attack_success: out.report.attack_success,
                total_s: t.total_s,
                crypto_s: t.crypto_s,
                channel_s: t.channel_s,
            });
        }
    }

    let mut order: Vec<String> = Vec::new();
    for cell in &cells {
        if !order.contains(&cell.defense) {
            order.push(cell.defense.clone());
        }
    }
    let rows: Vec<BenchRow> = order
        .iter()
        .map(|name| {
            let group: Vec<&BenchCell> = cells.iter().filter(|c| &c.defense == name).collect();
            let (acc_m, acc_s) = mean_std(&group.iter().map(|c| c.accuracy).collect::<Vec<_>>());
            let (auc_m, auc_s) = mean_std(&group.iter().map(|c| c.auc).collect::<Vec<_>>());
            let (tot_m, tot_s) = mean_std(&group.iter().map(|c| c.total_s).collect::<Vec<_>>());
            let (cry_m, _) = mean_std(&group.iter().map(|c| c.crypto_s).collect::<Vec<_>>());
            let (cha_m, _) = mean_std(&group.iter().map(|c| c.channel_s).collect::<Vec<_>>());
            let attacks: Vec<f64> = group.iter().filter_map(|c| c.attack_success).collect();
            BenchRow {
                defense: name.clone(),
                seeds: group.len(),
                accuracy_mean: acc_m,
                accuracy_std: acc_s,
                auc_mean: auc_m,
                auc_std: auc_s,
                attack_success_mean: if attacks.is_empty() {
                    None
                } else {
                    Some(attacks.iter().sum::<f64>() / attacks.len() as f64)
                },
                total_s_mean: tot_m,
                total_s_std: tot_s,
                crypto_s_mean: cry_m,
                channel_s_mean: cha_m,
            }
        })
        .collect();

    let time_of = |name: &str| {
        rows.iter()
            .find(|r| r.defense == name)
            .map(|r| r.total_s_mean)
    };
    let hybrid_over_baseline_time = match (time_of("hybrid"), time_of("none")) {
        (Some(h), Some(b)) if b > 0.0 => Some(h / b),
        _ => None,
    };

    Ok(BenchReport {
        schema: BENCH_REPORT_SCHEMA.to_string(),
        dataset: spec_template.dataset_name.clone(),
        cells,
        rows,
        hybrid_over_baseline_time,
    })
}
