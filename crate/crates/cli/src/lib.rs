//! `causalgrid` command line: one subcommand per pipeline stage, JSON
//! reports for machines and CSV tables for plots.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

pub use io::ExitStatus;

pub const DEFAULT_SEED: u64 = 42;
pub const THREADS_ENV: &str = "CAUSALGRID_THREADS";

#[derive(Debug, Parser)]
#[command(name = "causalgrid", version, about = "Causal analysis of hourly electricity market data")]
pub struct Cli {
    /// Master seed; every random step derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Hourly CSV with a `timestamp` column.
    #[arg(long)]
    pub data: PathBuf,

    /// Graph file, or `fr_market_price` / `fr_market_exports` for the bundled graphs.
    #[arg(long)]
    pub graph: String,

    /// Holiday list used when calendar columns must be derived (default: French holidays).
    #[arg(long)]
    pub calendar: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = causalgrid::gbt::DEFAULT_BLOCK_HOURS)]
    pub block_hours: usize,

    #[arg(long, default_value_t = causalgrid::gbt::DEFAULT_TEST_FRAC)]
    pub test_frac: f64,
}

#[derive(Debug, Args, Clone)]
pub struct GbtArgs {
    #[command(flatten)]
    pub split: SplitArgs,

    /// Random-search trials.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,

    /// Start of the crisis period for the per-period metrics.
    #[arg(long, default_value = "2021-10-01T00:00Z")]
    pub crisis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mechanisms {
    Gbt,
    Linear,
}

#[derive(Debug, Args, Clone)]
pub struct FlowArgs {
    #[command(flatten)]
    pub split: SplitArgs,

    /// Trained model to explain; trained with default hyperparameters when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Model class for intermediate nodes.
    #[arg(long, value_enum, default_value_t = Mechanisms::Gbt)]
    pub mechanism: Mechanisms,

    /// Number of test rows explained, evenly spaced.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,

    /// Sampled orderings per instance when exact enumeration is too large.
    #[arg(long, default_value_t = 200)]
    pub orderings: usize,

    #[arg(long, default_value_t = causalgrid::shapflow::DEFAULT_BACKGROUND)]
    pub background: usize,

    /// Size of the ranked edge table; dependence tables are written for these edges.
    #[arg(long, default_value_t = causalgrid::shapflow::DEFAULT_TOP_K)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic preset dataset with its ground truth.
    Synth {
        #[arg(long)]
        preset: String,
        /// Override the preset length in hours.
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Fit the linear SCM and report per-node R².
    Fit {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Regression slope and causal total effect of SRC on DST.
    Effects {
        src: String,
        dst: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-edge crisis impact `c * (mean during - mean before)` for each target.
    Impact {
        #[command(flatten)]
        data: DataArgs,
        /// Target node; every sink when absent.
        #[arg(long)]
        target: Vec<String>,
        #[arg(long, default_value = "2021-10-01T00:00Z")]
        crisis: String,
    },
    /// Local Markov violations against random node permutations.
    Falsify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = causalgrid::falsify::DEFAULT_PERMUTATIONS)]
        n_perm: usize,
        #[arg(long, default_value_t = causalgrid::falsify::SIGNIFICANCE)]
        alpha: f64,
    },
    /// Bivariate slopes overall and within equal-count strata of a confounder.
    Simpson {
        #[arg(long)]
        data: PathBuf,
        #[arg(short = 'x', long)]
        x: String,
        #[arg(short = 'y', long)]
        y: String,
        #[arg(short = 'c', long)]
        confounder: String,
        #[arg(long, default_value_t = causalgrid::stratify::DEFAULT_STRATA)]
        strata: usize,
    },
    /// Gradient boosted trees with a blocked split and random search.
    Gbt {
        #[command(flatten)]
        data: DataArgs,
        /// Target node; the graph's sink when absent.
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        gbt: GbtArgs,
    },
    /// Shapley-flow edge attributions of a model's predictions.
    Shapflow {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Run fit, impact, falsify, gbt and shapflow into one directory with a manifest.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = causalgrid::falsify::DEFAULT_PERMUTATIONS)]
        n_perm: usize,
        #[arg(long, default_value_t = causalgrid::falsify::SIGNIFICANCE)]
        alpha: f64,
        /// Extra effect reports as `SRC:DST`.
        #[arg(long = "effect")]
        effects: Vec<String>,
        /// Stratified analysis as `X:Y:CONFOUNDER`.
        #[arg(long)]
        simpson: Option<String>,
        #[command(flatten)]
        gbt: GbtArgs,
        #[arg(long, value_enum, default_value_t = Mechanisms::Gbt)]
        mechanism: Mechanisms,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        orderings: usize,
        #[arg(long, default_value_t = causalgrid::shapflow::DEFAULT_BACKGROUND)]
        background: usize,
        #[arg(long, default_value_t = causalgrid::shapflow::DEFAULT_TOP_K)]
        k: usize,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
/// Failures print one diagnostic line to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments").trim();
            eprintln!("causalgrid: {line}");
            return ExitStatus::Usage.code();
        }
    };
    match io::configure_threads().and_then(|()| commands::dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("causalgrid: {}", e.to_string().replace('\n', " "));
            e.status().code()
        }
    }
}
