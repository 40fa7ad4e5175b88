use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdp_lpcm::chain_io::ChainFormat;
use hdp_lpcm::config::RunConfig;
use hdp_lpcm::fit::{run_fit, FitOptions, FitOutcome};
use hdp_lpcm::report::{run_diagnose, run_evaluate, run_summarize};
use hdp_lpcm::simulate::run_simulate;
use hdp_lpcm::Result;

/// Dynamic network clustering with the HDP latent position clustering model.
#[derive(Debug, Parser)]
#[command(name = "hdp-lpcm", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; chain k uses seed + k - 1.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, created atomically.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of independent chains.
    #[arg(long, global = true, value_name = "K")]
    chains: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a benchmark network with its ground truth.
    Simulate {
        /// `homogeneous` or `inhomogeneous`; otherwise the configured spec.
        preset: Option<String>,
    },
    /// Run the sampler on an edge list or simulation bundle.
    Fit {
        input: Option<PathBuf>,
        /// Continue an interrupted run from its checkpoints.
        #[arg(long)]
        resume: bool,
        /// Pause every chain after this many sweeps, keeping a checkpoint.
        #[arg(long, value_name = "N")]
        max_sweeps: Option<usize>,
        /// Chain file encoding.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Partition, co-assignment, alignment and flow tables for a chain.
    Summarize {
        /// Chain file or fit bundle.
        input: PathBuf,
    },
    /// AUC, VI and ARI of a fit bundle.
    Evaluate {
        /// Fit bundle.
        input: PathBuf,
        /// Simulation bundle or `t,actor,group` table of true labels.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
    /// Trace, autocorrelation and effective sample size tables.
    Diagnose {
        /// Chain file or fit bundle.
        input: PathBuf,
        #[arg(long, value_name = "N")]
        max_lag: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Format {
    Jsonl,
    Binary,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.out.is_some() {
        config.out.clone_from(&cli.out);
    }
    if let Some(k) = cli.chains {
        config.chains = k;
    }
    config.quiet |= cli.quiet;
    match &cli.command {
        Command::Fit { format: Some(f), .. } => {
            config.output.chain_format = match f {
                Format::Jsonl => ChainFormat::Jsonl,
                Format::Binary => ChainFormat::Binary,
            }
        }
        Command::Evaluate { truth: Some(t), .. } => config.evaluate.truth = Some(t.clone()),
        Command::Diagnose { max_lag: Some(m), .. } => config.diagnose.max_lag = *m,
        _ => {}
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve(cli)?;
    let done = match &cli.command {
        Command::Simulate { preset } => run_simulate(&config, preset.as_deref())?,
        Command::Fit { input, resume, max_sweeps, .. } => {
            let options = FitOptions { resume: *resume, max_sweeps: *max_sweeps };
            match run_fit(&config, input.as_deref(), options)? {
                FitOutcome::Finished(dir) => dir,
                FitOutcome::Paused(staging) => {
                    eprintln!("paused; progress kept in {}; rerun with --resume", staging.display());
                    return Ok(());
                }
            }
        }
        Command::Summarize { input } => run_summarize(&config, input)?,
        Command::Evaluate { input, .. } => run_evaluate(&config, input)?,
        Command::Diagnose { input, .. } => run_diagnose(&config, input)?,
    };
    if !config.quiet {
        eprintln!("wrote {}", done.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
