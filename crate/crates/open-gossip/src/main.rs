//! Command-line front end: simulate, analyze, bound, spectrum.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use open_gossip::error::GossipError;
use open_gossip::experiments::{load_config, preset, run_command, Command, ExperimentConfig};
use open_gossip::table::ResultTable;

#[derive(Parser)]
#[command(
    name = "open-gossip",
    version,
    about = "Simulation and exact analytics for gossip among a changing population"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Run Monte Carlo trajectories or ensemble statistics.
    Simulate(RunArgs),
    /// Integrate the exact moment dynamics and variance envelopes.
    Analyze(RunArgs),
    /// Compare stationary variance bounds against simulation.
    Bound(RunArgs),
    /// Report the eigenstructure of the fixed-size moment flow.
    Spectrum(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PresetName {
    Fig1,
    Fig3,
    Fig4,
    Fig5,
}

impl PresetName {
    fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig1 => "fig1",
            PresetName::Fig3 => "fig3",
            PresetName::Fig4 => "fig4",
            PresetName::Fig5 => "fig5",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Name of a built-in configuration.
    #[arg(long, value_enum)]
    preset: Option<PresetName>,
    /// Override the configuration's random seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, GossipError> {
        let mut config = match (&self.config, self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, Some(name)) => preset(name.as_str())?,
            _ => {
                return Err(GossipError::Config(
                    "pass exactly one of --config PATH or --preset NAME".into(),
                ))
            }
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn emit(&self, table: &ResultTable) -> Result<(), GossipError> {
        match &self.out {
            Some(path) => {
                let file = File::create(path)?;
                self.write_to(table, file)
            }
            None => {
                let stdout = io::stdout();
                self.write_to(table, stdout.lock())
            }
        }
    }

    fn write_to<W: Write>(&self, table: &ResultTable, out: W) -> Result<(), GossipError> {
        match self.format {
            Format::Csv => table.write_csv(out),
            Format::Json => table.write_json(out),
        }
    }
}

fn run(cli: Cli) -> Result<(), GossipError> {
    let (command, args) = match &cli.command {
        CliCommand::Simulate(a) => (Command::Simulate, a),
        CliCommand::Analyze(a) => (Command::Analyze, a),
        CliCommand::Bound(a) => (Command::Bound, a),
        CliCommand::Spectrum(a) => (Command::Spectrum, a),
    };
    let config = args.resolve()?;
    let table = run_command(command, &config)?;
    args.emit(&table)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
