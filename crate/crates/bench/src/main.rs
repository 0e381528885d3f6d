use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use triage_bench::commands;
use triage_bench::config::{Overrides, RunConfig};
use triage_bench::{exit, BenchError};

#[derive(Parser)]
#[command(name = "triage-bench", version, about = "Issue-assignment benchmark pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threshold: Option<usize>,
    /// frequency, sft, cbr or llm.
    #[arg(long, global = true)]
    assigner: Option<String>,
    /// Reference column for `compare`: an assigner, a report file or a
    /// published key such as eclipsejdt/ncgbt.
    #[arg(long, global = true)]
    reference: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Corpus summary before and after developer filtering.
    Stats,
    /// Write split manifests.
    Split,
    /// Write training and validation JSON-lines files.
    EmitTrain,
    /// Train the learned rankers.
    Train,
    /// Rank the test splits and score them.
    Evaluate,
    /// Render a comparison table.
    Compare,
}

fn run(cli: &Cli) -> Result<(), BenchError> {
    let overrides = Overrides {
        corpus: cli.corpus.clone(),
        out_dir: cli.out.clone(),
        runs: cli.runs,
        seed: cli.seed,
        threshold: cli.threshold,
        assigner: cli.assigner.clone(),
        reference: cli.reference.clone(),
    };
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Stats => commands::cmd_stats(&config, &mut out).map(drop),
        Command::Split => commands::cmd_split(&config, &mut out).map(drop),
        Command::EmitTrain => commands::cmd_emit_train(&config, &mut out).map(drop),
        Command::Train => commands::cmd_train(&config, &mut out),
        Command::Evaluate => commands::cmd_evaluate(&config, &mut out).map(drop),
        Command::Compare => commands::cmd_compare(&config, &mut out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("triage-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
