use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use goalmed::scenario::{self, Mode};
use goalmed::service::{self, ServiceConfig};

/// Goal mediation engine for smart environments.
#[derive(Parser)]
#[command(name = "goalmed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one reaction over a scenario file.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Print)]
        mode: ModeArg,
    },
    /// Start the REST service.
    Serve {
        /// TOML config with `bind`, `port` and `scenario`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preload this scenario (overrides the config file).
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Tables of requests, mediated targets and actions.
    Print,
    /// Compare against the scenario's `expected` block.
    Verify,
    /// The reaction as JSON.
    Json,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Print => Mode::Print,
            ModeArg::Verify => Mode::Verify,
            ModeArg::Json => Mode::Json,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Run { scenario, mode } => {
            let outcome = scenario::run(&scenario, mode.into());
            if outcome.status == scenario::Status::Invalid {
                eprint!("{}", outcome.report);
            } else {
                print!("{}", outcome.report);
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Command::Serve { config, scenario } => {
            let mut config = match ServiceConfig::load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if scenario.is_some() {
                config.scenario = scenario;
            }
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            match runtime.block_on(service::serve(config)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
