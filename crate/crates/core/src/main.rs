use clap::{Parser, Subcommand};
use jamlink::harness::{Mode, RunOptions, run_experiment};
use jamlink::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "jamlink",
    about = "MIMO-OFDM jamming/anti-jamming link simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER/BLER sweep over Eb/N0 (CSV output).
    SimBer {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Interference-rank histogram of the configured jammer (JSON output).
    RankHist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Learn the jammer power allocation (JSON + per-step objective CSV).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Barrage-equivalent power of a learned allocation (JSON output).
    Gain {
        #[arg(long)]
        config: PathBuf,
        /// Learned allocation JSON (array or {"rho": [...]}).
        #[arg(long)]
        learned: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, out, opts) = match cli.command {
        Command::SimBer { config, out, seed } => {
            (config, out, RunOptions { seed, mode: Some(Mode::SimBer), learned_path: None })
        }
        Command::RankHist { config, out, seed } => {
            (config, out, RunOptions { seed, mode: Some(Mode::RankHist), learned_path: None })
        }
        Command::Train { config, out, seed } => {
            (config, out, RunOptions { seed, mode: Some(Mode::Train), learned_path: None })
        }
        Command::Gain { config, learned, out, seed } => (
            config,
            out,
            RunOptions { seed, mode: Some(Mode::Gain), learned_path: Some(learned) },
        ),
    };
    match run_experiment(&config, &out, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Configuration problems exit with 2, everything else with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidSpec(_)
        | Error::InvalidParameter(_)
        | Error::Json(_)
        | Error::AlistParse { .. }
        | Error::RankDeficient { .. } => 2,
        _ => 1,
    }
}
