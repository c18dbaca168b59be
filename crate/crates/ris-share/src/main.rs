use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ris_share::driver::{emit_csv, run_sweep, RunConfig, SweepKind};
use ris_share::error::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ris-share",
    version,
    about = "Batch simulations of surface-aided spectrum sharing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write one CSV row per grid point.
    Run {
        /// JSON file with scenario and solver settings.
        #[arg(long)]
        config: PathBuf,
        /// Parameter to sweep: pmax, pns, gamma or n.
        #[arg(long)]
        sweep: String,
        /// Trials per sweep point.
        #[arg(long)]
        trials: usize,
        /// Base seed; per-trial seeds derive from it.
        #[arg(long)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Codebook bits for the quantized comparator; defaults to the
        /// scenario's codebook_bits.
        #[arg(long)]
        discrete_bits: Option<u32>,
        /// Print per-point progress to stderr.
        #[arg(long)]
        trace: bool,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            sweep,
            trials,
            seed,
            out,
            discrete_bits,
            trace,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let cfg = RunConfig::from_json(&text)?;
            let kind = SweepKind::parse(&sweep)?;
            let bits = discrete_bits.unwrap_or(cfg.scenario.codebook_bits);
            let rows = run_sweep(&cfg.scenario, kind, trials, &cfg.ao, bits, seed, trace)?;
            emit_csv(&rows, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
