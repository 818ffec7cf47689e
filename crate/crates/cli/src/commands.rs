//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use vfl_core::attack::attack_transcript;
use vfl_core::bench::{run_bench, run_centralized_experiment, run_experiment, ExperimentSpec};
use vfl_core::data::{load_csv, load_features_csv, Dataset};
use vfl_core::mechanisms::ClipMode;
use vfl_core::message::Transcript;
use vfl_core::paillier::{keygen as paillier_keygen, save_private_key, save_public_key};
use vfl_core::protocol::{Defense, TrainConfig};
use vfl_core::report::AttackReportFile;
use vfl_core::rng::{RngStream, PARTY_BOB};
use vfl_core::{Error, Result};

#[derive(Args)]
pub struct KeygenArgs {
    /// Key length in bits (512, 1024 or 2048).
    #[arg(long, default_value_t = 2048)]
    bits: usize,
    /// Output path stem; writes `<out>.pub` and `<out>.key`.
    #[arg(long)]
    out: PathBuf,
    /// Seed for deterministic key generation.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Overwrite existing key files.
    #[arg(long)]
    force: bool,
}

pub fn keygen(args: KeygenArgs) -> Result<()> {
    let pub_path = args.out.with_extension("pub");
    let key_path = args.out.with_extension("key");
    for path in [&pub_path, &key_path] {
        if path.exists() && !args.force {
            return Err(Error::config(format!(
                "{} exists; pass --force to overwrite",
                path.display()
            )));
        }
    }
    let mut rng = RngStream::derive(args.seed, PARTY_BOB, "keygen");
    let (pk, sk) = paillier_keygen(args.bits, &mut rng)?;
    save_public_key(&pub_path, &pk)?;
    save_private_key(&key_path, &pk, &sk)?;
    println!(
        "wrote {} and {} ({} bit modulus)",
        pub_path.display(),
        key_path.display(),
        pk.bits()
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset CSV path.
    #[arg(long)]
    dataset: PathBuf,
    /// Label column name (or 0-based index with --no-header).
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Treat the first CSV row as data, not a header.
    #[arg(long)]
    no_header: bool,
    /// Residue defense: none, add, mult, hybrid, or centralized (oracle).
    #[arg(long, default_value = "none")]
    defense: String,
    /// Privacy budget for add/mult/hybrid.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Lower clipping bound (mult only).
    #[arg(long)]
    b1: Option<f64>,
    /// Upper clipping bound (mult only).
    #[arg(long)]
    b2: Option<f64>,
    /// Fraction of indicator ones (hybrid only).
    #[arg(long)]
    q: Option<f64>,
    /// Announced subset size |S| (hybrid only).
    #[arg(long)]
    s_size: Option<usize>,
    /// Restore literal unsigned clipping in the multiplicative mechanism.
    #[arg(long)]
    strict_clipping: bool,
    /// Divide hybrid gradients by the forwarded count instead of the true
    /// batch size.
    #[arg(long)]
    literal_denominator: bool,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Number of feature columns held by the passive party (default: all).
    #[arg(long)]
    d_alice: Option<usize>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2048)]
    key_bits: usize,
    /// Fixed-point scale for encrypted paths.
    #[arg(long, default_value_t = 1_000_000)]
    scale: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Write the run report (TOML) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include wall-clock timings in the report file (makes it
    /// non-reproducible byte-for-byte).
    #[arg(long)]
    timings: bool,
    /// Write the passive party's transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Dump the passive party's standardized training features (CSV).
    #[arg(long)]
    dump_alice_features: Option<PathBuf>,
    /// Dump the training labels in row order (CSV).
    #[arg(long)]
    dump_train_labels: Option<PathBuf>,
}

fn reject_param(name: &str, present: bool, defense: &str) -> Result<()> {
    if present {
        return Err(Error::config(format!(
            "--{name} is not valid with --defense {defense}"
        )));
    }
    Ok(())
}

fn require_epsilon(epsilon: Option<f64>, defense: &str) -> Result<f64> {
    epsilon.ok_or_else(|| Error::config(format!("--defense {defense} requires --epsilon")))
}

fn parse_defense(args: &TrainArgs) -> Result<Defense> {
    let clip_mode = if args.strict_clipping {
        ClipMode::UnsignedLiteral
    } else {
        ClipMode::SignPreserving
    };
    match args.defense.as_str() {
        "none" => {
            reject_param("epsilon", args.epsilon.is_some(), "none")?;
            reject_param("b1", args.b1.is_some(), "none")?;
            reject_param("b2", args.b2.is_some(), "none")?;
            reject_param("q", args.q.is_some(), "none")?;
            reject_param("s-size", args.s_size.is_some(), "none")?;
            Ok(Defense::None)
        }
        "add" => {
            reject_param("b1", args.b1.is_some(), "add")?;
            reject_param("b2", args.b2.is_some(), "add")?;
            reject_param("q", args.q.is_some(), "add")?;
            reject_param("s-size", args.s_size.is_some(), "add")?;
            Ok(Defense::Add {
                epsilon: require_epsilon(args.epsilon, "add")?,
            })
        }
        "mult" => {
            reject_param("q", args.q.is_some(), "mult")?;
            reject_param("s-size", args.s_size.is_some(), "mult")?;
            Ok(Defense::Mult {
                epsilon: require_epsilon(args.epsilon, "mult")?,
                b1: args.b1.unwrap_or(0.1),
                b2: args.b2.unwrap_or(10.0),
                clip_mode,
            })
        }
        "hybrid" => {
            reject_param("b1", args.b1.is_some(), "hybrid")?;
            reject_param("b2", args.b2.is_some(), "hybrid")?;
            Ok(Defense::Hybrid {
                epsilon: require_epsilon(args.epsilon, "hybrid")?,
                q: args.q.unwrap_or(0.4),
                s_size: args.s_size.ok_or_else(|| {
                    Error::config("--defense hybrid requires --s-size (announced subset size)")
                })?,
            })
        }
        other => Err(Error::config(format!(
            "unknown defense '{other}' (expected none, add, mult, hybrid or centralized)"
        ))),
    }
}

fn load_dataset(path: &Path, label_column: &str, has_header: bool) -> Result<Dataset> {
    let (ds, report) = load_csv(path, label_column, has_header)?;
    if report.rows_dropped > 0 {
        eprintln!(
            "note: dropped {} rows with missing values",
            report.rows_dropped
        );
    }
    if !report.constant_columns.is_empty() {
        eprintln!(
            "note: constant feature columns retained: {}",
            report.constant_columns.join(", ")
        );
    }
    if !report.one_hot_expanded.is_empty() {
        eprintln!(
            "note: one-hot encoded categorical columns: {}",
            report.one_hot_expanded.join(", ")
        );
    }
    Ok(ds)
}

fn write_features_csv(
    path: &Path,
    names: &[String],
    rows: &vfl_core::numeric::DenseMatrix,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    writer
        .write_record(names)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    for i in 0..rows.rows() {
        let record: Vec<String> = rows.row(i).iter().map(|v| format!("{v}")).collect();
        writer
            .write_record(&record)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}

pub fn train(args: TrainArgs) -> Result<()> {
    let ds = load_dataset(&args.dataset, &args.label_column, !args.no_header)?;

    let mut cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        lambda: args.lambda,
        seed: args.seed,
        defense: Defense::None,
        key_bits: args.key_bits,
        normalize_by_k: !args.literal_denominator,
        fixed_point_scale: args.scale,
    };

    let mut spec = ExperimentSpec::new(args.dataset.display().to_string(), cfg.clone());
    spec.label_column = args.label_column.clone();
    spec.d_alice = args.d_alice;
    spec.test_fraction = args.test_fraction;

    if args.defense == "centralized" {
        let (mut report, metrics) = run_centralized_experiment(&ds, &spec)?;
        if !args.timings {
            report.timings = None;
        }
        println!(
            "centralized: accuracy {:.4}, auc {:.4}, loss {:.4}",
            metrics.accuracy, metrics.auc, metrics.loss
        );
        if let Some(path) = &args.report {
            fs::write(path, report.to_toml()?)?;
            println!("report written to {}", path.display());
        }
        return Ok(());
    }

    cfg.defense = parse_defense(&args)?;
    spec.cfg = cfg;

    let mut out = run_experiment(&ds, &spec)?;
    if !args.timings {
        out.report.timings = None;
    }

    let metrics = out.report.final_metrics.expect("metrics computed");
    println!(
        "defense {}: accuracy {:.4}, auc {:.4}, loss {:.4}",
        args.defense, metrics.accuracy, metrics.auc, metrics.loss
    );
    if let Some(success) = out.report.attack_success {
        println!("transcript replay attack success rate: {success:.4}");
    }

    if let Some(path) = &args.report {
        fs::write(path, out.report.to_toml()?)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.transcript {
        out.transcript
            .as_ref()
            .expect("protocol runs produce transcripts")
            .save(path)?;
        println!("transcript written to {}", path.display());
    }
    if let Some(path) = &args.dump_alice_features {
        let d_alice = out.alice_train_features.cols();
        let names: Vec<String> = ds.feature_names[..d_alice].to_vec();
        write_features_csv(path, &names, &out.alice_train_features)?;
        println!("passive-party features written to {}", path.display());
    }
    if let Some(path) = &args.dump_train_labels {
        let mut text = String::from("label\n");
        for y in &out.train_labels {
            text.push_str(&format!("{y}\n"));
        }
        fs::write(path, text)?;
        println!("training labels written to {}", path.display());
    }
    Ok(())
}

#[derive(Args)]
pub struct AttackArgs {
    /// Transcript file produced by `train --transcript`.
    #[arg(long)]
    transcript: PathBuf,
    /// Passive party's feature CSV, aligned with the transcript's sample
    /// indices (see `train --dump-alice-features`).
    #[arg(long)]
    alice_features: PathBuf,
    /// Feature CSV has no header row.
    #[arg(long)]
    no_header: bool,
    /// Ground-truth labels (one per row) to score the attack against.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Write the attack report (TOML) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.parse::<f64>().is_err()) {
            continue; // header or blank
        }
        let value = line.parse::<f64>().ok();
        if value == Some(0.0) {
            labels.push(0);
        } else if value == Some(1.0) {
            labels.push(1);
        } else {
            return Err(Error::ingestion(format!(
                "labels file line {}: '{line}' is not a binary label",
                i + 1
            )));
        }
    }
    if labels.is_empty() {
        return Err(Error::ingestion("labels file contains no labels"));
    }
    Ok(labels)
}

pub fn attack(args: AttackArgs) -> Result<()> {
    let transcript = Transcript::load(&args.transcript)?;
    let features = load_features_csv(&args.alice_features, !args.no_header)?;
    let labels = args.labels.as_deref().map(load_labels).transpose()?;

    let report = attack_transcript(&transcript, &features, labels.as_deref())?;
    let rounds_recoverable = report.rounds.iter().filter(|r| r.recoverable).count();
    println!(
        "rounds: {} total, {} recoverable; labels committed: {} ({} by fallback guess)",
        report.rounds.len(),
        rounds_recoverable,
        report.committed_labels.len(),
        report.fallback_count
    );
    match report.success_rate {
        Some(rate) => println!("success rate vs ground truth: {rate:.4}"),
        None => println!("success rate: not computed (no --labels given)"),
    }

    if let Some(path) = &args.report {
        fs::write(path, AttackReportFile::from_report(&report).to_toml()?)?;
        println!("attack report written to {}", path.display());
    }
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    /// Dataset CSV path.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    no_header: bool,
    /// Comma-separated defenses to compare (none, add, mult, hybrid,
    /// centralized).
    #[arg(long, default_value = "none,add,mult,hybrid")]
    defenses: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "42")]
    seeds: String,
    /// Privacy budget used by add/mult/hybrid rows.
    #[arg(long, default_value_t = 10.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    b1: f64,
    #[arg(long, default_value_t = 10.0)]
    b2: f64,
    #[arg(long, default_value_t = 0.4)]
    q: f64,
    /// Announced subset size for the hybrid row (default: picked so the
    /// expected forwarded count clears the passive party's feature count).
    #[arg(long)]
    s_size: Option<usize>,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long)]
    d_alice: Option<usize>,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 512)]
    key_bits: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Write the bench report (TOML) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let ds = load_dataset(&args.dataset, &args.label_column, !args.no_header)?;
    let d_alice = args.d_alice.unwrap_or(ds.n_features());

    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("bad seed '{s}'")))
        })
        .collect::<Result<_>>()?;

    // Default hybrid geometry: expected L_RR about 1.5x the passive party's
    // feature count, within the training set size.
    let n_train_approx = ((ds.n_samples() as f64) * (1.0 - args.test_fraction)).round() as usize;
    let keep = vfl_core::mechanisms::RRParams::new(args.epsilon.min(3f64.ln()))?;
    let s_default = {
        let per_item =
            args.q * keep.keep_probability() + (1.0 - args.q) * (1.0 - keep.keep_probability());
        (((d_alice as f64) * 1.5 / per_item).ceil() as usize).min(n_train_approx)
    };
    let s_size = args.s_size.unwrap_or(s_default);

    let mut names = Vec::new();
    let mut defenses = Vec::new();
    let mut centralized_row = false;
    for raw in args.defenses.split(',') {
        let name = raw.trim();
        match name {
            "centralized" => centralized_row = true,
            "none" => defenses.push((name.to_string(), Defense::None)),
            "add" => defenses.push((
                name.to_string(),
                Defense::Add {
                    epsilon: args.epsilon,
                },
            )),
            "mult" => defenses.push((
                name.to_string(),
                Defense::Mult {
                    epsilon: args.epsilon,
                    b1: args.b1,
                    b2: args.b2,
                    clip_mode: ClipMode::SignPreserving,
                },
            )),
            "hybrid" => defenses.push((
                name.to_string(),
                Defense::Hybrid {
                    // Randomized response budget: capped at ln 3 so the
                    // indicator stays meaningfully obscured.
                    epsilon: args.epsilon.min(3f64.ln()),
                    q: args.q,
                    s_size,
                },
            )),
            other => return Err(Error::config(format!("unknown defense '{other}' in list"))),
        }
        names.push(name.to_string());
    }
    if defenses.is_empty() && !centralized_row {
        return Err(Error::config("no defenses requested"));
    }

    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        key_bits: args.key_bits,
        ..TrainConfig::default()
    };
    let mut spec = ExperimentSpec::new(args.dataset.display().to_string(), cfg);
    spec.label_column = args.label_column.clone();
    spec.d_alice = Some(d_alice);
    spec.test_fraction = args.test_fraction;

    let report = run_bench(&ds, &spec, &defenses, &seeds, centralized_row)?;
    print!("{}", report.render_table());
    if let Some(path) = &args.out {
        fs::write(path, report.to_toml()?)?;
        println!("bench report written to {}", path.display());
    }
    Ok(())
}
