use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wanderlab::commands::{self, Outcome};
use wanderlab::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "wanderlab",
    about = "Build and certify wandering-domain models of 3D diffeomorphisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Scenario configuration file (flat key = value sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Print the full default scenario and exit.
    #[arg(long, global = true)]
    dump_defaults: bool,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the cycle model and dump the saddle/marker report.
    Model,
    /// Intrinsic-tangency search and the generalized-tangency checker.
    Tangency,
    /// Unit-modulus crossing scan of the multiplier pair.
    HopfScan,
    /// Build the circle map and verify its wandering family.
    Denjoy,
    /// Full pipeline ending in the wandering-domain certificate bundle.
    Certify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(3);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    if cli.dump_defaults {
        print!("{}", Scenario::default().emit());
        return ExitCode::SUCCESS;
    }

    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (model|tangency|hopf-scan|denjoy|certify)");
        return ExitCode::from(3);
    };

    let mut scenario = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match Scenario::parse(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(3);
                }
            },
            Err(e) => {
                eprintln!("cannot read config {}: {e}", path.display());
                return ExitCode::from(3);
            }
        },
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }

    let result = match command {
        Command::Model => commands::run_model(&scenario, &cli.out),
        Command::Tangency => commands::run_tangency(&scenario, &cli.out),
        Command::HopfScan => commands::run_hopf_scan(&scenario, &cli.out),
        Command::Denjoy => commands::run_denjoy(&scenario, &cli.out),
        Command::Certify => commands::run_certify(&scenario, &cli.out),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("verdict: {:?}", outcome);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
