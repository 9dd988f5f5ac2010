use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entsim::cli::{run, Command, GlobalOptions, THREADS_ENV};
use entsim::io::OutputFormat;

/// Simulations of continuous-variable entanglement distillation, cavity-QED
/// entanglement and ion-trap quantum-jump trajectories.
#[derive(Debug, Parser)]
#[command(name = "entsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format: csv or json.
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    /// Overrides the Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Fock cutoff.
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Fidelity and success probability against gτ for equal passages.
    CavityIdeal,
    /// Fidelity against the passage asymmetry or along a path family.
    CavityPath,
    /// Quantum-jump trajectory statistics.
    Mc,
    /// Per-iteration Gaussification measures.
    Distill,
    /// Wigner function of one mode.
    Wigner,
    /// Load, save or measure a state.
    State,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::CavityIdeal => Command::CavityIdeal,
        Sub::CavityPath => Command::CavityPath,
        Sub::Mc => Command::Mc,
        Sub::Distill => Command::Distill,
        Sub::Wigner => Command::Wigner,
        Sub::State => Command::State,
    };
    let opts = GlobalOptions { out: cli.out, format: cli.format, seed: cli.seed, cutoff: cli.cutoff, threads: cli.threads };
    match run(command, cli.config.as_deref(), &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("entsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
