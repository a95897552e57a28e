use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kyp_cli::bench::cmd_bench;
use kyp_cli::commands::{cmd_solve, cmd_synth, cmd_validate, SolveFlags, SynthFlags};

#[derive(Parser)]
#[command(name = "kyp", version, about = "Structure-exploiting KYP-SDP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file: dimensions, symmetry, PSD weight, controllability.
    Validate {
        /// Problem file (JSON).
        path: PathBuf,
    },
    /// Solve a problem file with the path-following barrier method.
    Solve {
        /// Problem file (JSON).
        path: PathBuf,
        /// Initial barrier weight (default: automatic).
        #[arg(long)]
        t0: Option<f64>,
        /// Final barrier weight.
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        /// Multiplicative weight update per stage.
        #[arg(long = "t-factor")]
        t_factor: Option<f64>,
        /// Newton-decrement threshold per stage.
        #[arg(long = "newton-tol")]
        newton_tol: Option<f64>,
        /// Report output path (default: <input>.report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and solve a robust state-feedback instance with actuator
    /// uncertainty, then verify the certificate.
    Synth {
        /// Number of masses in the generated spring-damper chain.
        #[arg(long)]
        chain: Option<usize>,
        /// Plant file (JSON with "A" and "B1" matrices).
        #[arg(long)]
        plant: Option<PathBuf>,
        /// Actuator multiplier scale: admissible channel signals satisfy
        /// ||w|| <= ||z|| / gamma, so smaller values mean more uncertainty.
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Output prefix for <prefix>.problem.json and <prefix>.report.json.
        #[arg(long)]
        out: Option<String>,
        /// Final barrier weight.
        #[arg(long = "t-max")]
        t_max: Option<f64>,
    },
    /// Time chain instances of growing state dimension and fit the
    /// per-iteration cost exponent.
    Bench {
        /// Comma-separated state dimensions (even numbers; n = 2k masses).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Timing repeats per size (median is reported).
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Solve { path, t0, t_max, t_factor, newton_tol, out } => {
            cmd_solve(&path, &SolveFlags { t0, t_max, t_factor, newton_tol, out })
        }
        Command::Synth { chain, plant, gamma, out, t_max } => cmd_synth(&SynthFlags {
            chain,
            plant,
            gamma,
            out_prefix: out,
            solve: SolveFlags { t_max, ..SolveFlags::default() },
        }),
        Command::Bench { sizes, repeats, csv } => cmd_bench(&sizes, repeats, csv.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
