//! End-to-end tests of the `vfl-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vfl_core::data::synth;
use vfl_core::report::{AttackReportFile, TrainReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vfl-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_synth_csv(path: &Path, n: usize, d: usize, separation: f64, seed: u64) {
    let ds = synth(n, d, separation, seed).unwrap();
    let mut text = String::new();
    text.push_str(&ds.feature_names.join(","));
    text.push_str(",label\n");
    for i in 0..n {
        for v in ds.x.row(i) {
            text.push_str(&format!("{v},"));
        }
        text.push_str(&format!("{}\n", ds.y[i]));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn keygen_writes_loadable_keys_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("testkey");
    let stem_str = stem.to_str().unwrap();

    let out = run(&["keygen", "--bits", "512", "--out", stem_str, "--seed", "7"]);
    assert_ok(&out);
    let pk = vfl_core::paillier::load_public_key(&stem.with_extension("pub")).unwrap();
    let (pk2, _sk) = vfl_core::paillier::load_private_key(&stem.with_extension("key")).unwrap();
    assert_eq!(pk, pk2);

    // Repeat without --force: refused with the config exit code.
    let out = run(&["keygen", "--bits", "512", "--out", stem_str]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "keygen", "--bits", "512", "--out", stem_str, "--force", "--seed", "8",
    ]);
    assert_ok(&out);

    // Unsupported bit count.
    let other = dir.path().join("bad");
    let out = run(&["keygen", "--bits", "123", "--out", other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_attack_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_synth_csv(&data, 80, 12, 3.0, 900);
    let p = |name: &str| -> PathBuf { dir.path().join(name) };

    let out = run(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--defense",
        "none",
        "--key-bits",
        "512",
        "--epochs",
        "2",
        "--batch-size",
        "8",
        "--report",
        p("run.toml").to_str().unwrap(),
        "--transcript",
        p("run.vflt").to_str().unwrap(),
        "--dump-alice-features",
        p("alice.csv").to_str().unwrap(),
        "--dump-train-labels",
        p("labels.csv").to_str().unwrap(),
    ]);
    assert_ok(&out);

    let report = TrainReport::from_toml(&std::fs::read_to_string(p("run.toml")).unwrap()).unwrap();
    assert_eq!(report.attack_success, Some(1.0));
    assert!(report.final_metrics.unwrap().accuracy > 0.8);
    assert!(report.timings.is_none(), "timings are opt-in");

    // Attack from files alone.
    let out = run(&[
        "attack",
        "--transcript",
        p("run.vflt").to_str().unwrap(),
        "--alice-features",
        p("alice.csv").to_str().unwrap(),
        "--labels",
        p("labels.csv").to_str().unwrap(),
        "--report",
        p("attack.toml").to_str().unwrap(),
    ]);
    assert_ok(&out);
    let attack =
        AttackReportFile::from_toml(&std::fs::read_to_string(p("attack.toml")).unwrap()).unwrap();
    assert!(attack.recoverable);
    assert_eq!(attack.success_rate, Some(1.0));
    assert_eq!(attack.fallback_count, 0);

    // Without labels the rate is absent.
    let out = run(&[
        "attack",
        "--transcript",
        p("run.vflt").to_str().unwrap(),
        "--alice-features",
        p("alice.csv").to_str().unwrap(),
        "--report",
        p("attack2.toml").to_str().unwrap(),
    ]);
    assert_ok(&out);
    let attack2 =
        AttackReportFile::from_toml(&std::fs::read_to_string(p("attack2.toml")).unwrap()).unwrap();
    assert_eq!(attack2.success_rate, None);
}

#[test]
fn same_seed_produces_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_synth_csv(&data, 60, 6, 3.0, 901);
    let mut reports = Vec::new();
    for name in ["a.toml", "b.toml"] {
        let path = dir.path().join(name);
        let out = run(&[
            "train",
            "--dataset",
            data.to_str().unwrap(),
            "--defense",
            "add",
            "--epsilon",
            "1",
            "--epochs",
            "2",
            "--batch-size",
            "8",
            "--seed",
            "5",
            "--report",
            path.to_str().unwrap(),
        ]);
        assert_ok(&out);
        reports.push(std::fs::read(path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn hybrid_train_resists_file_level_attack() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_synth_csv(&data, 150, 6, 3.0, 902);
    let p = |name: &str| -> PathBuf { dir.path().join(name) };

    let out = run(&[
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--defense",
        "hybrid",
        "--epsilon",
        "1.0986122886681098",
        "--q",
        "0.4",
        "--s-size",
        "30",
        "--key-bits",
        "512",
        "--epochs",
        "1",
        "--transcript",
        p("run.vflt").to_str().unwrap(),
        "--dump-alice-features",
        p("alice.csv").to_str().unwrap(),
    ]);
    assert_ok(&out);

    let out = run(&[
        "attack",
        "--transcript",
        p("run.vflt").to_str().unwrap(),
        "--alice-features",
        p("alice.csv").to_str().unwrap(),
        "--report",
        p("attack.toml").to_str().unwrap(),
    ]);
    assert_ok(&out);
    let attack =
        AttackReportFile::from_toml(&std::fs::read_to_string(p("attack.toml")).unwrap()).unwrap();
    assert!(!attack.recoverable);
    assert_eq!(attack.rounds_recoverable, 0);
    assert!(attack.fallback_count > 0);
}

#[test]
fn incompatible_defense_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_synth_csv(&data, 40, 4, 2.0, 903);
    let d = data.to_str().unwrap();

    for args in [
        vec!["train", "--dataset", d, "--defense", "add"], // missing epsilon
        vec![
            "train",
            "--dataset",
            d,
            "--defense",
            "add",
            "--epsilon",
            "1",
            "--b1",
            "0.1",
        ],
        vec![
            "train",
            "--dataset",
            d,
            "--defense",
            "none",
            "--epsilon",
            "1",
        ],
        vec![
            "train",
            "--dataset",
            d,
            "--defense",
            "hybrid",
            "--epsilon",
            "1",
        ], // missing s-size
        vec!["train", "--dataset", d, "--defense", "bogus"],
    ] {
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "args {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    // Missing dataset file is an ingestion error.
    let out = run(&[
        "train",
        "--dataset",
        "/nonexistent.csv",
        "--defense",
        "none",
    ]);
    assert_eq!(out.status.code(), Some(4));

    // Corrupt transcript is a parse/protocol error.
    let bad = dir.path().join("bad.vflt");
    std::fs::write(&bad, b"not a transcript").unwrap();
    let alice = dir.path().join("alice.csv");
    std::fs::write(&alice, "f0\n0.5\n").unwrap();
    let out = run(&[
        "attack",
        "--transcript",
        bad.to_str().unwrap(),
        "--alice-features",
        alice.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_emits_table_with_ratio_and_zero_crypto_ldp_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth.csv");
    write_synth_csv(&data, 100, 8, 3.0, 904);
    let out_path = dir.path().join("bench.toml");

    let out = run(&[
        "bench",
        "--dataset",
        data.to_str().unwrap(),
        "--defenses",
        "none,add,hybrid",
        "--seeds",
        "1,2",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--key-bits",
        "512",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("hybrid/baseline time ratio:"),
        "table missing ratio: {stdout}"
    );

    let report =
        vfl_core::bench::BenchReport::from_toml(&std::fs::read_to_string(&out_path).unwrap())
            .unwrap();
    assert!(report.hybrid_over_baseline_time.is_some());
    let add_row = report.rows.iter().find(|r| r.defense == "add").unwrap();
    assert_eq!(add_row.crypto_s_mean, 0.0);
    assert_eq!(add_row.seeds, 2);
}
