//! `nphmm`: batch pipeline for spectral estimation of HMMs with
//! nonparametric emissions, plug-in posterior inference and bound audits.

mod commands;
mod config;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nphmm::bases::BasisFamily;

use crate::commands::Ctx;
use crate::config::{Overrides, RunConfig};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "nphmm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replicate seed; repeat for several.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Output directory (also where downstream commands look for inputs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    basis: Option<BasisArg>,
    /// Basis size M.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Hist,
    Trig,
}

impl From<BasisArg> for BasisFamily {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Hist => BasisFamily::Histogram,
            BasisArg::Trig => BasisFamily::Trigonometric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory per seed.
    Simulate,
    /// Fit the spectral estimator to the estimation segment of each trajectory.
    Fit,
    /// Plug-in and oracle posteriors on the inference segment.
    Infer,
    /// Compare measured posterior errors with the filtering and smoothing bounds.
    Audit,
    /// Moment and coefficient errors across the sample sizes in `p_grid`.
    Rates,
    /// Markov constants, concentration constant and η₃ of the basis.
    Constants,
    /// Two-beta benchmark: simulate, fit with hist M=11 and trig M=13, infer.
    #[command(name = "reproduce-section4")]
    ReproduceSection4,
}

fn run(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    let ov = Overrides {
        seeds: c.seeds.clone(),
        out: c.out.clone(),
        basis: c.basis.map(Into::into),
        m: c.m,
    };
    let cfg = RunConfig::load(c.config.as_deref(), &ov)?;
    let ctx = Ctx::new(&cfg, c.quiet);
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Fit => commands::fit_cmd(&ctx),
        Command::Infer => commands::infer(&ctx),
        Command::Audit => commands::audit(&ctx),
        Command::Rates => commands::rates(&ctx),
        Command::Constants => commands::constants(&ctx),
        Command::ReproduceSection4 => commands::reproduce(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
