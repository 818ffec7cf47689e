//! `vfl-lab`: command-line harness for the vertical federated logistic
//! regression lab.
//!
//! Subcommands: `keygen` (Paillier key files), `train` (run one protocol
//! configuration end to end), `attack` (replay a transcript as the passive
//! party), `bench` (defense comparison grid).
//!
//! Exit codes: 0 success, 2 configuration error, 3 protocol/transcript
//! error, 4 ingestion/file error.

mod commands;

use clap::{Parser, Subcommand};
use vfl_core::Error;

#[derive(Parser)]
#[command(
    name = "vfl-lab",
    version,
    about = "Two-party vertical federated logistic regression lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Paillier keypair and write versioned key files.
    Keygen(commands::KeygenArgs),
    /// Train a model under a residue defense and write reports.
    Train(commands::TrainArgs),
    /// Replay a transcript as the passive party and infer labels.
    Attack(commands::AttackArgs),
    /// Compare defenses across seeds on one dataset.
    Bench(commands::BenchArgs),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Dimension(_) | Error::Overflow(_) => 2,
        Error::Protocol(_) | Error::Parse(_) => 3,
        Error::Ingestion(_) | Error::Io(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen(args) => commands::keygen(args),
        Command::Train(args) => commands::train(args),
        Command::Attack(args) => commands::attack(args),
        Command::Bench(args) => commands::bench(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
