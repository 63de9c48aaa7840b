use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

mod commands;
mod config;
mod sim_flags;

use sim_flags::SimFlags;

/// Cells-alone, wells-alone and cell-well union analysis of cell-well data.
#[derive(Parser, Debug)]
#[command(name = "cellwell", version, args_override_self = true)]
struct Cli {
    /// Worker threads for replications (default: all cores). Results do not
    /// depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,

    /// Flat `key = value` file of flag settings; command-line flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replicated simulation study comparing the pipelines.
    Simulate(SimulateArgs),
    /// Summarize and classify wells from CSV files.
    Analyze(AnalyzeArgs),
    /// Bio-pattern uncertainty diagnostics.
    Uncertainty(UncertaintyArgs),
    /// Two-dimensional toy example on maxima.
    Toy(ToyArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// Number of replications.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated pipelines: wells, cells, cwu-pca, cwu-pls, each
    /// optionally with `+std`.
    #[arg(long, default_value = "wells,wells+std,cwu-pca+std,cwu-pls+std")]
    pub pipelines: String,
    /// Summary statistics, e.g. `q01,q25,q50,q75,q99` or `min,max,q25,q50,q75,sd`.
    #[arg(long, default_value = "q01,q25,q50,q75,q99")]
    pub summary: String,
    #[command(flatten)]
    pub sim: SimFlags,
    /// DWD penalty: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub penalty: String,
    /// Direction for uncertainty: `truth` or `pls`.
    #[arg(long, default_value = "truth")]
    pub direction: String,
    #[command(flatten)]
    pub subsample: SubsampleFlags,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Cells-alone subsampling.
#[derive(Args, Debug, Clone)]
pub struct SubsampleFlags {
    /// Wells per repetition (default: all).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub subsample_wells: Option<u64>,
    /// Cells per well per repetition.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub subsample_cells: u64,
    /// Repetitions.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub subsample_reps: u64,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct AnalyzeArgs {
    /// Cell table: `well_id` plus numeric feature columns.
    #[arg(long)]
    pub cells: PathBuf,
    /// Optional well table: `well_id` plus numeric columns.
    #[arg(long)]
    pub wells: Option<PathBuf>,
    /// Assessment: `well_id`, `rank`, `class`.
    #[arg(long)]
    pub assess: Option<PathBuf>,
    /// Data objects: cells, wells, cwu-pca, cwu-pls.
    #[arg(long, default_value = "wells")]
    pub objects: String,
    #[arg(long, default_value = "q01,q25,q50,q75,q99")]
    pub summary: String,
    /// Divide each well's cells by their within-well sds.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub std_within: bool,
    /// Also report the leave-one-well-out error.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub loocv: bool,
    #[arg(long, default_value = "auto")]
    pub penalty: String,
    /// Seed for cells-alone subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub subsample: SubsampleFlags,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct UncertaintyArgs {
    /// Use a simulated dataset with known direction and means.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub from_sim: bool,
    /// Seed of the simulated dataset.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sim: SimFlags,
    /// Data objects for the simulated pipeline: wells, cwu-pca, cwu-pls.
    #[arg(long, default_value = "wells")]
    pub objects: String,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false, action = ArgAction::Set)]
    pub std_within: bool,
    #[arg(long, default_value = "auto")]
    pub penalty: String,
    #[arg(long, default_value = "truth")]
    pub direction: String,
    /// Within-well sd matrix: `well_id` plus one column per coordinate.
    #[arg(long)]
    pub sd_matrix: Option<PathBuf>,
    /// Direction file: one coefficient per coordinate (comma, space or
    /// newline separated).
    #[arg(long)]
    pub alpha: Option<PathBuf>,
    /// Quantile statistics, e.g. `q25,q75`.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
pub struct ToyArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(3..))]
    pub wells: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub cells: u64,
    /// Ellipses: heterogeneous, shared or degenerate.
    #[arg(long, default_value = "heterogeneous", value_parser = ["heterogeneous", "shared", "degenerate"])]
    pub covariance: String,
    /// Distance between adjacent well means.
    #[arg(long, default_value_t = 6.0)]
    pub spacing: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// A failure and the exit code it maps to.
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<cellwell::Error> for Failure {
    fn from(e: cellwell::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Uncertainty(a) => commands::uncertainty(a),
        Command::Toy(a) => commands::toy(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
