//! `fairgen` command-line tool.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Error caused by the invocation rather than by the work itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "fairgen", version, about = "Coverage-driven adaptive design data generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample and simulate an initial dataset
    Init(InitArgs),
    /// Grow a dataset with FairGen iterations
    Run(RunArgs),
    /// Report the coverage score of a dataset
    Coverage(CoverageArgs),
    /// Train the ensemble and export its uncertainty heatmap
    Uncertainty(UncertaintyArgs),
    /// Compare FairGen against grid and LHS sampling
    Compare(CompareArgs),
    /// Measure generative accuracy of MDNs trained on datasets
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Grid,
    Lhs,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    #[arg(long, default_value = "synthetic")]
    pub problem: String,
    #[arg(long, value_enum, default_value = "grid")]
    pub sampler: SamplerArg,
    /// Requested number of designs (grid rounds to the nearest full grid)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Initial dataset; generated from the config when omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "fairgen-run")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct CoverageArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write a coverage map here
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct UncertaintyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid nodes per axis
    #[arg(long, default_value_t = 50)]
    pub resolution: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Stop FairGen once it holds this many feasible designs
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "fairgen-compare")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset CSV, optionally as LABEL=PATH; repeat for several
    #[arg(long = "data", required = true)]
    pub data: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub n_test: usize,
    #[arg(long, default_value_t = 10)]
    pub shapes_per_test: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the MAE table here
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the per-axis absolute-error scatter here
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|cause| {
        cause.is::<UsageError>()
            || matches!(
                cause.downcast_ref::<fairgen::Error>(),
                Some(fairgen::Error::InvalidConfig(_))
            )
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
