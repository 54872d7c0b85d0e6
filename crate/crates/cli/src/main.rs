//! Command-line front end: data simulation, the two-stage fitting pipeline,
//! sensitivity grids, model checks, comparator fits, strata analyses, and
//! figure rendering. Every command writes a run manifest next to its
//! artifacts; reruns with identical inputs reproduce identical hashes.

mod cmd_pipeline;
mod cmd_report;
mod cmd_sim;
mod cmd_strata;
mod errors;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use errors::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "modprior", version, about = "Partially identified binary regression toolkit")]
struct Cli {
    /// Worker threads for stage-2 replay (affects speed only, never output).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Master seed for all randomness in this command.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DrawFormat {
    Binary,
    Csv,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a partially observed bivariate-probit data set.
    Simulate {
        #[command(flatten)]
        out: OutArgs,
        /// linear or sine mean structure.
        #[arg(long, value_enum)]
        design: cmd_sim::DesignArg,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Optional JSON file overriding the reference parameters.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Stage 1: fit the probit tree ensemble and store phi draws.
    FitPhi(cmd_pipeline::FitPhiArgs),
    /// Stage 2: draw (c, theta) under one spec and reconstruct p.
    SampleTheta(cmd_pipeline::SampleThetaArgs),
    /// Replay stage 2 over a list of specs against one phi artifact.
    Sensitivity(cmd_pipeline::SensitivityArgs),
    /// Prior-data contradiction scores per design point.
    Check(cmd_pipeline::CheckArgs),
    /// Fit the bivariate-probit comparator by Gibbs sampling.
    FitBiprobit(cmd_sim::FitBiprobitArgs),
    /// Compare modular and comparator estimates against simulation truth.
    Compare(cmd_sim::CompareArgs),
    /// Encouragement-design principal-strata analyses.
    #[command(subcommand)]
    Strata(cmd_strata::StrataCommand),
    /// Render summary CSVs into SVG figures.
    #[command(subcommand)]
    Report(cmd_report::ReportCommand),
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { out, design, n, params } => cmd_sim::simulate(out, design, n, params),
        Command::FitPhi(args) => cmd_pipeline::fit_phi(args),
        Command::SampleTheta(args) => cmd_pipeline::sample_theta(args),
        Command::Sensitivity(args) => cmd_pipeline::sensitivity(args),
        Command::Check(args) => cmd_pipeline::check(args),
        Command::FitBiprobit(args) => cmd_sim::fit_biprobit(args),
        Command::Compare(args) => cmd_sim::compare(args),
        Command::Strata(cmd) => cmd_strata::run(cmd),
        Command::Report(cmd) => cmd_report::run(cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind.exit_code())
        }
    }
}

pub(crate) fn ensure_out_dir(path: &std::path::Path) -> CliResult<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
