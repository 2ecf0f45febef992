//! `condprep`: analyze, design and simulate continuously monitored Gaussian systems.

mod commands;
mod error;
mod output;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use condprep_core::acceptance::Fixture;

use commands::Context;
use error::CliError;
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "condprep", version, about)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the detection efficiency.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Reject ill-conditioned Riccati solutions instead of flagging them.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state conditional covariance, purity and certificates.
    Analyze,
    /// Synthesize a system whose conditional steady state is a target.
    Design,
    /// Monte Carlo of the conditional mean and the covariance flow.
    Simulate,
    /// Run the acceptance criteria.
    Verify {
        #[arg(long, value_enum, default_value_t = FixtureArg::Clean)]
        fixture: FixtureArg,
        /// Comma-separated criterion ids; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    Clean,
    FlippedM,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let ctx = Context {
        out: cli.out,
        seed: cli.seed,
        eta: cli.eta,
        strict: cli.strict,
    };
    let load = || match &cli.scenario {
        Some(p) => Scenario::load(p),
        None => Err(CliError::Config("--scenario <path> is required".into())),
    };
    match cli.command {
        Command::Analyze => commands::analyze(&load()?, &ctx),
        Command::Design => commands::design(&load()?, &ctx),
        Command::Simulate => commands::simulate(&load()?, &ctx),
        Command::Verify { fixture, only } => {
            let fixture = match fixture {
                FixtureArg::Clean => Fixture::Clean,
                FixtureArg::FlippedM => Fixture::FlippedM,
            };
            commands::verify(fixture, &only, &ctx.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
