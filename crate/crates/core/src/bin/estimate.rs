use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use magnus_gp::experiment::{self, ExperimentConfig, Study};
use magnus_gp::Error;

#[derive(Parser)]
#[command(name = "estimate", version, about = "Monte-Carlo studies of continuous-time SE(3) motion priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one study, or all of them, and write CSV tables plus a manifest.
    Run {
        #[arg(long, value_enum)]
        study: StudyArg,
        /// TOML config, or a manifest.json from a previous run.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep going when a solve hits the iteration limit.
        #[arg(long)]
        allow_nonconverged: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Accuracy,
    Interp,
    Cost,
    All,
}

impl StudyArg {
    fn studies(self) -> Vec<Study> {
        match self {
            StudyArg::Accuracy => vec![Study::Accuracy],
            StudyArg::Interp => vec![Study::Interp],
            StudyArg::Cost => vec![Study::Cost],
            StudyArg::All => Study::ALL.to_vec(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let Command::Run { study, config, out, trials, seed, allow_nonconverged } = Cli::parse().command;
    let result = ExperimentConfig::load(&config).and_then(|mut cfg| {
        if let Some(t) = trials {
            cfg.trials = t;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        experiment::run(&cfg, &study.studies(), &out, allow_nonconverged)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("estimate: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
