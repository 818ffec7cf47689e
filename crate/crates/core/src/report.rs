//! Structured-text reports.
//!
//! Reports are TOML documents with a schema version field, chosen over a
//! bespoke binary format for diffability. Floats are written in shortest
//! round-trip form, so serialize/deserialize is lossless and two runs with
//! the same seed produce byte-identical report files (timings, which cannot
//! be deterministic, are an opt-in section).

use serde::{Deserialize, Serialize};

use crate::attack::AttackReport;
use crate::error::{Error, Result};
use crate::numeric::Metrics;
use crate::protocol::{RunTimings, TrainConfig};

pub const TRAIN_REPORT_SCHEMA: &str = "vfl-train-report/1";
pub const ATTACK_REPORT_SCHEMA: &str = "vfl-attack-report/1";
pub const BENCH_REPORT_SCHEMA: &str = "vfl-bench-report/1";

/// Everything needed to reproduce a run, echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dataset: String,
    pub label_column: String,
    pub d_alice: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_fraction: f64,
    pub train: TrainConfig,
}

/// Result document for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema: String,
    pub config: ConfigEcho,
    pub per_epoch_loss: Vec<f64>,
    pub final_metrics: Option<Metrics>,
    pub attack_success: Option<f64>,
    pub timings: Option<RunTimings>,
}

impl TrainReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::parse(format!("serialize report: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: TrainReport =
            toml::from_str(text).map_err(|e| Error::parse(format!("parse report: {e}")))?;
        if report.schema != TRAIN_REPORT_SCHEMA {
            return Err(Error::parse(format!(
                "unsupported report schema '{}'",
                report.schema
            )));
        }
        Ok(report)
    }
}

/// Flattened, file-friendly form of an [`AttackReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReportFile {
    pub schema: String,
    pub recoverable: bool,
    pub rounds_total: usize,
    pub rounds_recoverable: usize,
    pub labels_committed: usize,
    pub fallback_count: usize,
    pub success_rate: Option<f64>,
    /// Samples with solver-derived labels, parallel to `inferred_labels`.
    pub inferred_samples: Vec<u32>,
    pub inferred_labels: Vec<u8>,
}

impl AttackReportFile {
    pub fn from_report(report: &AttackReport) -> Self {
        let (samples, labels) = match &report.inferred_labels {
            Some(map) => map.iter().map(|(&s, &b)| (s, b)).unzip(),
            None => (Vec::new(), Vec::new()),
        };
        AttackReportFile {
            schema: ATTACK_REPORT_SCHEMA.to_string(),
            recoverable: report.recoverable,
            rounds_total: report.rounds.len(),
            rounds_recoverable: report.rounds.iter().filter(|r| r.recoverable).count(),
            labels_committed: report.committed_labels.len(),
            fallback_count: report.fallback_count,
            success_rate: report.success_rate,
            inferred_samples: samples,
            inferred_labels: labels,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::parse(format!("serialize report: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: AttackReportFile =
            toml::from_str(text).map_err(|e| Error::parse(format!("parse report: {e}")))?;
        if report.schema != ATTACK_REPORT_SCHEMA {
            return Err(Error::parse(format!(
                "unsupported report schema '{}'",
                report.schema
            )));
        }
        Ok(report)
    }
}
