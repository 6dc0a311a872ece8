//! `fxamm` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid arguments or configuration, 2 I/O or
//! input-parse failures.

mod commands;
mod error;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fxamm", version, about = "CFMM pools for tokenized FX pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bid/ask quotes for a range of trade sizes.
    Quote(QuoteArgs),
    /// Simulate every session and write one row per session.
    Simulate(SimulateArgs),
    /// Re-run the batch over a parameter grid and summarize each grid point.
    Sweep(SweepArgs),
    /// Write synthetic one-minute bars in the input file format.
    GenData(GenDataArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` file; keys are long flag names. Flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["sum", "product", "mixed"])]
    pub rule: Option<String>,
    /// Sum-term weight; a comma list where several curves are allowed.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Client fee in basis points.
    #[arg(long)]
    pub fee_bp: Option<f64>,
    /// Arbitrageur fee in basis points [default: the client fee].
    #[arg(long)]
    pub arb_fee_bp: Option<f64>,
    /// Initial balances as a multiple of the unit pool.
    #[arg(long)]
    pub liquidity: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write JSON arrays instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Bar file to slice into daily sessions.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Use generated sessions instead of an input file.
    #[arg(long)]
    pub synthetic: bool,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Days with fewer real bars are dropped.
    #[arg(long)]
    pub min_bars: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Annualized volatility of the generated mid.
    #[arg(long)]
    pub daily_vol: Option<f64>,
    #[arg(long)]
    pub half_spread_bp: Option<f64>,
    /// Log-normal sigma of the per-minute volume draws.
    #[arg(long)]
    pub volume_concentration: Option<f64>,
    #[arg(long)]
    pub pair: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Run without the arbitrageur.
    #[arg(long)]
    pub no_arb: bool,
    #[arg(long, value_parser = ["joint", "sequential"])]
    pub order_mode: Option<String>,
    #[arg(long, value_parser = ["lagged", "current"])]
    pub arb_pricing: Option<String>,
    #[arg(long, value_parser = ["by-fill", "as-printed"])]
    pub spread_weighting: Option<String>,
}

#[derive(Debug, Args)]
pub struct QuoteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Equilibrium price, domestic per foreign.
    #[arg(long)]
    pub s: Option<f64>,
    /// Foreign balance; the domestic balance is `s · n0`.
    #[arg(long)]
    pub n0: Option<f64>,
    /// Trade sizes: comma list or integer range `a..b`.
    #[arg(long)]
    pub sizes: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Per-minute table of one session.
    #[arg(long, value_name = "FILE")]
    pub dump_steps: Option<PathBuf>,
    /// Session index for `--dump-steps`.
    #[arg(long)]
    pub dump_session: Option<usize>,
    /// Distribution summary of the annualized key variables.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    /// LP P&L regression on return and volume variance.
    #[arg(long, value_name = "FILE")]
    pub regression: Option<PathBuf>,
    #[arg(long, value_parser = ["net", "total", "per-side"])]
    pub volume_measure: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = ["alpha", "fee", "liquidity"])]
    pub axis: Option<String>,
    /// Grid values; fees are in basis points.
    #[arg(long)]
    pub values: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub synth: SynthArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fxamm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
