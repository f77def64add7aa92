use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tpx::cli::{self, CompareArgs, SolveArgs, SweepArgs, VerifyArgs};

#[derive(Parser)]
#[command(
    name = "tpx",
    version,
    about = "Transfer-price optima under expected tax-penalty cost"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario: closed form, numerical oracle, and their agreement
    Solve {
        /// Scenario JSON file
        #[arg(long)]
        config: PathBuf,
        /// Skip the closed form (required for penalty slopes <= 1)
        #[arg(long)]
        oracle_only: bool,
        /// Write output here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter and emit closed-form optima as CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: b, q, tau, t1, t2, enforcement_home, enforcement_host, p_min, p_max, r
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of evenly spaced points, at least 2
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the configured trade under all four regimes and tabulate
    CompareRegimes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the claim verification suite
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random samples per claim
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() {
    if let Ok(raw) = std::env::var("TPX_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring TPX_THREADS={raw} (expected a positive integer)"),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, cli::CliError> {
    match cli.command {
        Command::Solve {
            config,
            oracle_only,
            out,
        } => {
            cli::cmd_solve(&SolveArgs {
                config,
                oracle_only,
                out,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            out,
        } => {
            cli::cmd_sweep(&SweepArgs {
                config,
                param,
                from,
                to,
                steps,
                out,
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CompareRegimes { config, out } => {
            cli::cmd_compare_regimes(&CompareArgs { config, out })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, samples, out } => {
            let all_passed = cli::cmd_verify(&VerifyArgs { seed, samples, out })?;
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
