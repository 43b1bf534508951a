use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kelly_core::drawdown::ConstraintKind;
use kelly_core::market::IngestError;

mod commands;
mod output;

use output::Format;

/// Kelly betting experiments: growth optimization, drawdown analysis,
/// adaptive betting and price ingestion.
#[derive(Parser, Debug)]
#[command(name = "kelly-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Log-optimal fraction next to the Taylor and GBM approximations
    Optimize(OptimizeArgs),
    /// Expected drawdown and drawdown probabilities over a grid of fractions
    Drawdown(DrawdownArgs),
    /// Growth-optimal fraction under a drawdown constraint
    Constrained(ConstrainedArgs),
    /// Grid estimate of a two-gamble constraint set and midpoint tests
    ProbeConvexity(ProbeArgs),
    /// Adaptive betting on a coin with estimated win probability
    Adaptive(AdaptiveArgs),
    /// Daily price CSV to an empirical return model (JSON)
    Ingest(IngestArgs),
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Model JSON file (`{"atoms": [{"x": [...], "p": ...}]}`)
    #[arg(long, conflicts_with = "coin")]
    pub model: Option<PathBuf>,

    /// Coin as `win,loss,p`; repeat for independent coins
    #[arg(long, value_parser = parse_coin, allow_hyphen_values = true)]
    pub coin: Vec<CoinSpec>,
}

#[derive(Debug, Clone, Copy)]
pub struct CoinSpec {
    pub win: f64,
    pub loss: f64,
    pub p: f64,
}

fn parse_coin(s: &str) -> Result<CoinSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [w, l, p] = parts[..] else {
        return Err(format!("expected win,loss,p, got {s:?}"));
    };
    let num = |t: &str, name: &str| t.parse::<f64>().map_err(|_| format!("{name} {t:?} is not a number"));
    Ok(CoinSpec {
        win: num(w, "win")?,
        loss: num(l, "loss")?,
        p: num(p, "p")?,
    })
}

#[derive(Args, Debug)]
pub struct SimArgs {
    /// Horizon in bets
    #[arg(long, default_value_t = 252)]
    pub n: usize,

    /// Monte Carlo paths
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Years between bets
    #[arg(long, default_value_t = 1.0 / 252.0)]
    pub dt: f64,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct DrawdownArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    /// Fractions to evaluate (single-gamble models); default is a grid
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<f64>,

    /// Grid spacing when `--k` is not given
    #[arg(long, default_value_t = 0.05)]
    pub k_step: f64,

    /// Simplex grid divisions for multi-gamble models
    #[arg(long, default_value_t = 10)]
    pub grid: usize,

    /// Also report P(D ≤ eps)
    #[arg(long)]
    pub eps: Option<f64>,

    /// Add exact enumeration columns (small horizons only)
    #[arg(long)]
    pub exact: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ConstrainedArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    #[arg(long, value_parser = parse_kind, default_value = "expected")]
    pub kind: ConstraintKind,

    #[arg(long)]
    pub eps: f64,

    /// Allowed probability of exceeding eps (probabilistic kind)
    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long, default_value_t = 1.0 / 252.0)]
    pub dt: f64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    #[arg(long, value_parser = parse_kind, default_value = "expected")]
    pub kind: ConstraintKind,

    #[arg(long)]
    pub eps: f64,

    #[arg(long)]
    pub delta: Option<f64>,

    /// Simplex grid divisions per unit
    #[arg(long, default_value_t = 20)]
    pub grid: usize,

    /// Random in-set pairs whose midpoints are tested
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,

    /// Grid CSV, or the full report with `--format json`
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AdaptiveArgs {
    /// True win probability of the even-money coin
    #[arg(long, default_value_t = 0.6)]
    pub p: f64,

    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Training window M
    #[arg(long, default_value_t = 50)]
    pub window: usize,

    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    pub runs: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 1.0)]
    pub v0: f64,

    /// Directory for per-run traces and the run summary
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// CSV with a date column followed by price columns
    #[arg(long)]
    pub prices: PathBuf,

    /// `SYMBOL=column`; repeat to choose and rename columns
    #[arg(long, value_parser = parse_symbol)]
    pub symbol: Vec<(String, String)>,

    /// Model JSON destination; standard output if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_symbol(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((sym, col)) if !sym.is_empty() && !col.is_empty() => Ok((sym.to_string(), col.to_string())),
        None if !s.is_empty() => Ok((s.to_string(), s.to_string())),
        _ => Err(format!("expected SYMBOL=column, got {s:?}")),
    }
}

fn parse_kind(s: &str) -> Result<ConstraintKind, String> {
    match s {
        "expected" => Ok(ConstraintKind::Expected),
        "probabilistic" => Ok(ConstraintKind::Probabilistic),
        "surrogate" => Ok(ConstraintKind::Surrogate),
        _ => Err(format!("unknown constraint kind {s:?} (expected, probabilistic, surrogate)")),
    }
}

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Failure::new(EXIT_VALIDATION, anyhow::anyhow!(msg.into()))
    }
}

impl From<kelly_core::Error> for Failure {
    fn from(e: kelly_core::Error) -> Self {
        use kelly_core::Error as E;
        let code = match &e {
            E::Io(_) => EXIT_IO,
            E::Infeasible(_) | E::EmptyFeasibleSet => EXIT_INFEASIBLE,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e)
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::Io(_) | IngestError::Csv(_) => EXIT_IO,
            IngestError::Model(kelly_core::Error::Io(_)) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure::new(code, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::new(EXIT_IO, e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(EXIT_IO, e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize(a) => commands::optimize(&a),
        Command::Drawdown(a) => commands::drawdown(&a),
        Command::Constrained(a) => commands::constrained(&a),
        Command::ProbeConvexity(a) => commands::probe_convexity(&a),
        Command::Adaptive(a) => commands::adaptive(&a),
        Command::Ingest(a) => commands::ingest(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
