use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fabric::sim::config::PlotStyle;
use fabric_cli::verify::Suite;

#[derive(Parser)]
#[command(name = "fabric", version, about = "Run, plot and verify optimization-fabric experiments")]
struct Cli {
    /// Overrides the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Style {
    Paths,
    ArmFrames,
    EnergyTrace,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Algebra,
    Energies,
    Energization,
    Speed,
}

#[derive(Subcommand)]
enum Command {
    /// Runs an experiment config and writes CSVs plus a manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` override, e.g. `integration.dt=0.02`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Draws SVG figures from a run directory.
    Plot {
        dir: PathBuf,
        #[arg(long, value_enum)]
        style: Style,
    },
    /// Runs a property suite and prints a pass/fail table.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    fabric_cli::init_threads();
    let code = match cli.command {
        Command::Run { config, out, set } => fabric_cli::cmd_run(&config, &out, &set, cli.seed),
        Command::Plot { dir, style } => {
            let style = match style {
                Style::Paths => PlotStyle::Paths,
                Style::ArmFrames => PlotStyle::ArmFrames,
                Style::EnergyTrace => PlotStyle::EnergyTrace,
            };
            fabric_cli::cmd_plot(&dir, style)
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteArg::Algebra => Suite::Algebra,
                SuiteArg::Energies => Suite::Energies,
                SuiteArg::Energization => Suite::Energization,
                SuiteArg::Speed => Suite::Speed,
            };
            fabric_cli::cmd_verify(suite, cli.seed)
        }
    };
    ExitCode::from(code as u8)
}
