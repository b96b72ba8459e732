mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "MVMD_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::NotConverged(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<mixture_dynamics::Error> for CliError {
    fn from(e: mixture_dynamics::Error) -> Self {
        use mixture_dynamics::Error as E;
        match e {
            E::InvalidInput(_) | E::Configuration(_) | E::UnsupportedSpec(_) | E::Io(_) | E::ShiftDomain { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mvmd", version, about = "Shifted lognormal mixture smiles, cross pricing and implied correlation")]
struct Cli {
    /// Worker threads (default: $MVMD_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a shifted lognormal mixture to one maturity of a market file.
    CalibrateSmile(CalibrateSmileArgs),
    /// Fit the correlation between two calibrated assets to cross quotes.
    ImpliedCorr(ImpliedCorrArgs),
    /// Price options on the product of two assets.
    PriceCross(PriceCrossArgs),
    /// Cross implied-volatility smile from a fitted or ATM-implied correlation.
    Extrapolate(ExtrapolateArgs),
    /// Monte Carlo simulation of the pair with a summary and optional dump.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
pub struct CalibrateSmileArgs {
    /// Market file (JSON).
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    /// Maturity slice in years; optional when the file has one maturity.
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Output parameter file (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Fit table (CSV); defaults to the parameter path with a .csv extension.
    #[arg(long)]
    pub fit_table: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Hold the shift at this value instead of fitting it.
    #[arg(long)]
    pub fixed_shift: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    /// Parameter file of asset 1.
    #[arg(long)]
    pub asset1: PathBuf,
    /// Parameter file of asset 2.
    #[arg(long)]
    pub asset2: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct CorrArgs {
    /// Constant correlation.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Scenario correlation matrix, rows separated by ';' (e.g. "-0.8,-0.2;-0.6,-0.3").
    #[arg(long, allow_hyphen_values = true)]
    pub rho_matrix: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Semianalytic,
    ScmdMc,
}

#[derive(Args, Debug)]
pub struct ImpliedCorrArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Cross market file (JSON).
    #[arg(long)]
    pub quotes: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineArg::Semianalytic)]
    pub engine: EngineArg,
    /// Fit a scenario correlation matrix instead of a scalar.
    #[arg(long)]
    pub random_corr: bool,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Paths for the Monte Carlo engine.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Time steps for the Monte Carlo engine (default: 250 per year).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Quanto-adjust with rates "domestic,intermediate,foreign".
    #[arg(long)]
    pub rates: Option<String>,
    /// Report (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-strike fit table (CSV).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PriceCrossArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub corr: CorrArgs,
    /// Comma-separated strikes.
    #[arg(long, allow_hyphen_values = true)]
    pub strikes: String,
    /// Maturity in years.
    #[arg(short = 'T', long)]
    pub maturity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub df: f64,
    /// Price puts instead of calls.
    #[arg(long)]
    pub put: bool,
    /// Quanto-adjust with rates "domestic,intermediate,foreign".
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CorrSource {
    /// Imply a scalar correlation from the quote nearest the money.
    Atm,
    /// Read the correlation from --corr-file.
    File,
}

#[derive(Args, Debug)]
pub struct ExtrapolateArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum, default_value_t = CorrSource::Atm)]
    pub corr_source: CorrSource,
    /// Cross market file; required for the atm source.
    #[arg(long)]
    pub quotes: Option<PathBuf>,
    /// Correlation spec or fit report (JSON); required for the file source.
    #[arg(long)]
    pub corr_file: Option<PathBuf>,
    /// Strikes as "k1,k2,..." or "lo:hi:n" (default: 21 strikes from 0.8 to 1.2 times the forward).
    #[arg(long)]
    pub strike_grid: Option<String>,
    /// Maturity in years (default: the quotes' maturity, else the shorter reference maturity).
    #[arg(short = 'T', long)]
    pub maturity: Option<f64>,
    /// Discount factor (default: from the quotes' domestic rate, else 1).
    #[arg(long)]
    pub df: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    MuvmExact,
    ScmdEuler,
    MvmdEuler,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub corr: CorrArgs,
    #[arg(long, value_enum, default_value_t = SchemeArg::MuvmExact)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Time steps (default: 250 per year).
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub antithetic: bool,
    /// Horizon in years (default: the shorter reference maturity).
    #[arg(short = 'T', long)]
    pub maturity: Option<f64>,
    /// Quanto-adjust with rates "domestic,intermediate,foreign".
    #[arg(long)]
    pub rates: Option<String>,
    /// Binary dump of the terminal samples.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Summary (JSON); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Input(format!("{THREADS_ENV}={s:?} is not a thread count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), CliError> {
        init_threads(cli.threads)?;
        match &cli.command {
            Command::CalibrateSmile(a) => commands::calibrate_smile(a),
            Command::ImpliedCorr(a) => commands::implied_corr(a),
            Command::PriceCross(a) => commands::price_cross(a),
            Command::Extrapolate(a) => commands::extrapolate(a),
            Command::Simulate(a) => commands::simulate(a),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
