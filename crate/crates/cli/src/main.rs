use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use homeostat_cli::{cmd_moduli, cmd_simulate, cmd_train, cmd_verify};

#[derive(Parser)]
#[command(
    name = "homeostat",
    version,
    about = "Material-point engine and model-discovery toolkit for growth \
             and remodeling with homeostatic surfaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the stress trajectory of a prescribed deformation history
    Simulate {
        /// Weight document (TOML)
        #[arg(long)]
        weights: PathBuf,
        /// Experiment or protocol CSV providing the deformation history
        #[arg(long)]
        data: PathBuf,
        /// Output trajectory CSV
        #[arg(long)]
        out: PathBuf,
        /// Optional run config (supplies dt resampling and eps)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Newton tolerance override
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Train the thirteen weights on experiment CSVs
    Train {
        /// Experiment CSV; repeat the flag for joint fits
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        /// Run config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output weight document; the loss history lands next to it
        #[arg(long)]
        out: PathBuf,
        /// Seed override for the weight initialization
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the linearized moduli of a weight document
    Moduli {
        /// Weight document (TOML)
        #[arg(long)]
        weights: PathBuf,
    },
    /// Run the seeded invariant suite
    Verify {
        /// Base seed for all randomized checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional path for the pass/fail report
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Simulate {
            weights,
            data,
            out,
            config,
            eps,
        } => cmd_simulate(&weights, &data, config.as_deref(), &out, eps).map(|_| 0),
        Command::Train {
            data,
            config,
            out,
            seed,
        } => cmd_train(&data, &config, &out, seed).map(|_| 0),
        Command::Moduli { weights } => cmd_moduli(&weights).map(|_| 0),
        Command::Verify { seed, out } => {
            cmd_verify(seed, out.as_deref()).map(|ok| if ok { 0 } else { 3 })
        }
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_parse() { 2 } else { 3 })
        }
    }
}
