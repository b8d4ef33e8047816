//! `onn`: train, simulate and plan photonic perceptrons from a JSON run
//! config.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands::{SweepAxis, TableFormat};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "onn", version, about = "Photonic perceptron simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config leaf, e.g. `--set chain.impairments.electrical_snr_db=36`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`, then $ONN_OUTPUT_DIR, then `out`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the perceptron offline and evaluate it digitally.
    Train(RunArgs),
    /// Run the test set through the photonic chain.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Trained model; defaults to `<output_dir>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Photonic accuracy against one impairment knob.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        /// Impairment seeds per value.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Throughput, latency and wavelength budget of a layered network.
    Plan {
        plan: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the input and detected waveforms of one test sample as CSV.
    ExportTrace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        sample_index: usize,
        /// Also write every comb line's envelope.
        #[arg(long)]
        per_channel: bool,
    },
    /// Optical neural network approaches compared by latency and throughput.
    Table1 {
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
}

fn load(run: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&run.config, &run.overrides)?;
    let out = cfg.output_dir(run.output_dir.as_deref());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(run) => {
            let (cfg, out) = load(&run)?;
            commands::cmd_train(&cfg, &out)
        }
        Command::Simulate { run, model } => {
            let (cfg, out) = load(&run)?;
            commands::cmd_simulate(&cfg, &out, model.as_deref())
        }
        Command::Sweep { run, model, axis, values, seeds } => {
            let (cfg, out) = load(&run)?;
            commands::cmd_sweep(&cfg, &out, model.as_deref(), axis, &values, seeds)
        }
        Command::Plan { plan, output } => commands::cmd_plan(&plan, output.as_deref()),
        Command::ExportTrace { run, model, sample_index, per_channel } => {
            let (cfg, out) = load(&run)?;
            commands::cmd_export_trace(&cfg, &out, model.as_deref(), sample_index, per_channel)
        }
        Command::Table1 { format } => commands::cmd_table1(format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default();
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code());
        }
    };
    let started = Instant::now();
    match run(cli) {
        Ok(()) => {
            eprintln!("done in {:.3} s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}
