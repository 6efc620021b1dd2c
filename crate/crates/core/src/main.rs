use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ksflow::cli::commands::{run_simulate, run_sweep, run_threshold, run_verify};

#[derive(Parser)]
#[command(name = "ksflow", version, about = "Radial degenerate Keller-Segel simulator and invariant checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the problem and write the trajectory.
    Simulate(Common),
    /// Compute the blow-up concentration threshold and certificate.
    Threshold(Common),
    /// Run the invariant checks on a stored or freshly computed trajectory.
    Verify(Common),
    /// Run a parameter sweep and write one CSV row per cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, env = "KSFLOW_WORKERS")]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => run_simulate(&c.config, c.out.as_deref()),
        Command::Threshold(c) => run_threshold(&c.config, c.out.as_deref()),
        Command::Verify(c) => run_verify(&c.config, c.out.as_deref()),
        Command::Sweep { common, workers } => run_sweep(&common.config, common.out.as_deref(), *workers),
    };
    let code = match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("ksflow: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
