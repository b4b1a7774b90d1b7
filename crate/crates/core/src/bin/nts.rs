use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nts_core::experiment::{report, run_experiment, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "nts", version, about = "Natural type selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir` (default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the traces in a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let out = out
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            for o in run_experiment(&cfg, &out)? {
                let last = o.trace.last();
                let rate = last
                    .oracle_rate_bits
                    .map_or_else(|| "n/a".to_string(), |r| format!("{r:.6} bits"));
                println!("{}: {} records, final rate {rate}", o.dir.display(), o.trace.records.len());
            }
        }
        Command::Report { input } => print!("{}", report(&input)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
