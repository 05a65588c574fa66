//! `lge-synthlab`: composite label maps, cluster sweeps, synthesis metrics,
//! augmentation, diffusion numerics and paired tests from the command line.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 bad input data,
//! 4 internal invariant failure.

mod cmd;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use output::Format;

#[derive(Debug, Parser)]
#[command(name = "lge-synthlab", version, about = "Label-conditioned LGE MRI synthesis toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output path (stdout when omitted, where that makes sense).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a composite label map from a volume and its masks.
    Compose(cmd::compose::Args),
    /// Score k-means clusterings over a range of k.
    Sweep(cmd::sweep::Args),
    /// Compare real and synthetic volumes or feature sets.
    Eval(cmd::eval::Args),
    /// Sample or replay an augmentation plan.
    Augment(cmd::augment::Args),
    /// Diffusion numerics.
    Diff(cmd::diff::Args),
    /// Wilcoxon signed-rank test on paired scores.
    Test(cmd::test::Args),
}

/// Settings shared by every subcommand.
pub struct Global {
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = Global {
        seed: cli.seed,
        format: cli.format,
        out: cli.out,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Compose(a) => cmd::compose::run(&global, a),
        Command::Sweep(a) => cmd::sweep::run(&global, a),
        Command::Eval(a) => cmd::eval::run(&global, a),
        Command::Augment(a) => cmd::augment::run(&global, a),
        Command::Diff(a) => cmd::diff::run(&global, a),
        Command::Test(a) => cmd::test::run(&global, a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LGE_SYNTHLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lge-synthlab: {e}");
            e.exit_code()
        }
    }
}
