//! `anytime-iter`: run coverage experiments for anytime-valid boundaries
//! from JSON configs and write JSON/CSV reports.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Environment variable that replaces `seed_base` in any config.
pub const SEED_ENV: &str = "ANYTIME_ITER_SEED";

#[derive(Parser)]
#[command(name = "anytime-iter", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo coverage of a boundary.
    Coverage(Common),
    /// Exceedance of the fixed-time SGD bound at one iterate.
    LastIterate(Common),
    /// Anytime vs fixed-horizon SGD widths.
    WidthTable(Common),
    /// Robbins-Monro law-of-iterated-logarithm statistic.
    Lil(Common),
    /// Two-phase Oja run from a uniformly random start.
    OjaColdStart(Common),
    /// Paths of a recursion that converge only with probability 1 - p.
    Counterexample(Common),
    /// Epochs of the stitched step schedule as CSV `t,eta,width`.
    StitchDump(Common),
    /// List every boundary with its formula.
    Catalog(CatalogArgs),
}

#[derive(Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for reports; created if missing.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args)]
pub struct CatalogArgs {
    /// Confidence level at which the boundaries are instantiated.
    #[arg(long, default_value_t = (-2f64).exp())]
    pub delta: f64,
    /// Also write catalog.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Coverage(c) => commands::coverage(c),
        Command::LastIterate(c) => commands::last_iterate(c),
        Command::WidthTable(c) => commands::width_table(c),
        Command::Lil(c) => commands::lil(c),
        Command::OjaColdStart(c) => commands::oja_cold_start(c),
        Command::Counterexample(c) => commands::counterexample(c),
        Command::StitchDump(c) => commands::stitch_dump(c),
        Command::Catalog(c) => commands::catalog(c),
    };
    match res {
        Ok(commands::Verdict::Pass) => ExitCode::SUCCESS,
        Ok(commands::Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
