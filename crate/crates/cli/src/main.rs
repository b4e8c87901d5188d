//! `mnr`: simulate data, run Markov neighborhood regression on a CSV file,
//! select causal features, or replay the simulation benchmarks.
//!
//! Exit codes: 0 success, 2 bad flags, 3 bad input data, 4 numerical
//! failure, 5 benchmark bands not met.

mod commands;
mod data;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mnr::blanket::BlanketMethod;
use mnr::datagen::Family;
use mnr::select::SelectMethod;

use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "mnr",
    version,
    about = "Markov neighborhood regression for high-dimensional inference"
)]
struct Cli {
    /// Worker threads (default: MNR_THREADS, else all cores). Results do not
    /// depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV with a JSON sidecar
    /// holding the true model.
    Simulate(SimulateArgs),
    /// Confidence intervals and p-values for every feature.
    Infer(InferArgs),
    /// MNR restricted to the selected features, with Holm selection.
    Causal(CausalArgs),
    /// Run benchmark configs and check their acceptance bands.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Design {
    Toeplitz,
    Ar2,
    Equicorr,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub design: Design,
    /// Correlation parameter for toeplitz and equicorr.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    /// Nonzero coefficients as "index:value,...", 1-based.
    #[arg(long)]
    pub beta: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub intercept: f64,
    /// Noise variance (gaussian).
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Event-time scale (cox).
    #[arg(long, default_value_t = 0.1)]
    pub lambda0: f64,
    /// Censoring-time scale (cox).
    #[arg(long, default_value_t = 1.0)]
    pub lambda_c: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path; the model is written next to it as `<stem>.model.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mnr,
    MnrScreen,
    Desparsified,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (survival time for cox).
    #[arg(long)]
    pub response: String,
    /// Event indicator column, 1 = event, 0 = censored (cox only).
    #[arg(long)]
    pub event: Option<String>,
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[arg(long, value_enum, default_value = "mnr")]
    pub method: Method,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_parser = parse_blanket)]
    pub blanket: Option<BlanketMethod>,
    /// Variable selection, e.g. sis-then-scad, sis-then-mcp, lasso, sis.
    #[arg(long, value_parser = parse_selection)]
    pub selection: Option<SelectMethod>,
    /// Recorded in the manifest; every pipeline is deterministic.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output path stem; writes `<stem>.csv`, `<stem>.json` and
    /// `<stem>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CausalArgs {
    #[command(flatten)]
    pub infer: InferArgs,
    /// Holm threshold.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config (JSON); may be repeated.
    #[arg(long, required = true)]
    pub config: Vec<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the master seed of every config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the reduced desk-scale variant of each config.
    #[arg(long)]
    pub desk: bool,
    /// Replicates to run, overriding the config.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Print wall-clock time per config to standard error.
    #[arg(long)]
    pub timing: bool,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
        .map_err(|e: mnr::datagen::DataError| e.to_string())
}

fn parse_blanket(s: &str) -> Result<BlanketMethod, String> {
    s.parse()
        .map_err(|e: mnr::blanket::BlanketError| e.to_string())
}

fn parse_selection(s: &str) -> Result<SelectMethod, String> {
    s.parse()
        .map_err(|e: mnr::select::SelectError| e.to_string())
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("MNR_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse().map_err(|_| {
                CliError::Usage(format!("MNR_THREADS='{v}' is not a thread count"))
            })?),
            _ => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {t} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Causal(a) => commands::causal(&a),
        Command::Bench(a) => commands::bench(&a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
