use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod score;
mod tools;

#[derive(Parser)]
#[command(name = "diartool", version, about = "Diarization scoring, combination, clustering and simulation")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "DIARTOOL_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Combine several RTTM hypotheses into one.
    Combine(tools::CombineArgs),
    /// Diarization error rate.
    Der(score::DerArgs),
    /// Concatenated minimum-permutation word error rate.
    Cpwer(score::WerArgs),
    /// Optimal reference combination word error rate.
    Orcwer(score::OrcArgs),
    /// Word-level diarization error rate.
    Wder(score::WerArgs),
    /// Spectral clustering of an affinity matrix.
    Cluster(tools::ClusterArgs),
    /// Simulate conversations from single-speaker utterances.
    Simulate(tools::SimulateArgs),
}

/// Reference and hypothesis files plus the missing-session policy.
#[derive(Args)]
pub struct Pair {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    /// Fail instead of warning when a session is on one side only.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Exponential,
    Hungarian,
    Rls,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RankOrderArg {
    Descending,
    Ascending,
}

pub fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Write to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<diartool_core::Error>() {
            return e.exit_code() as u8;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("starting worker pool")?;
    }
    match cli.command {
        Command::Combine(a) => tools::combine(a),
        Command::Der(a) => score::der(a),
        Command::Cpwer(a) => score::cpwer(a),
        Command::Orcwer(a) => score::orcwer(a),
        Command::Wder(a) => score::wder(a),
        Command::Cluster(a) => tools::cluster(a),
        Command::Simulate(a) => tools::simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
