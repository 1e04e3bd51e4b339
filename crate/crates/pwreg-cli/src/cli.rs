//! Argument surface of the `pwreg` binary.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pwreg",
    version,
    about = "Continuous piecewise polynomial regression on 1-D scattered data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at fixed breakpoints, or search locations for a segment count
    Fit(FitArgs),
    /// Search locations and select the number of breakpoints by pruning
    Select(SelectArgs),
    /// Generate synthetic piecewise-linear data
    Generate(GenerateArgs),
    /// Evaluate a stored model against a CSV
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitMode {
    /// Breakpoints at empirical quantiles, snapped to the candidate grid
    Uniform,
    /// Breakpoints drawn from the candidate grid (requires --seed)
    Random,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Uniform => "uniform",
            InitMode::Random => "random",
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["breakpoints", "segments"])))]
pub struct FitArgs {
    /// Input CSV with two numeric columns x,y (one optional header row)
    pub input: PathBuf,

    /// Polynomial degree of every segment
    #[arg(long)]
    pub degree: usize,

    /// Comma-separated interior breakpoints for a fixed-location fit
    #[arg(long, conflicts_with_all = ["init", "seed", "min_seg_points", "parallel"])]
    pub breakpoints: Option<String>,

    /// Number of segments; breakpoint locations are searched greedily
    #[arg(long)]
    pub segments: Option<usize>,

    /// Initialization of the search
    #[arg(long, value_enum, default_value_t = InitMode::Uniform)]
    pub init: InitMode,

    /// Seed for random initialization
    #[arg(long)]
    pub seed: Option<u64>,

    /// Smallest segment population the search may visit [default: degree + 1]
    #[arg(long)]
    pub min_seg_points: Option<usize>,

    /// Score sweep proposals on a thread pool (result is identical)
    #[arg(long)]
    pub parallel: bool,

    /// Report destination
    #[arg(long)]
    pub out: PathBuf,

    /// Also write a dense prediction grid to this CSV
    #[arg(long)]
    pub pred_grid: Option<PathBuf>,

    /// Number of grid points for --pred-grid
    #[arg(long, default_value_t = 512)]
    pub grid_points: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input CSV with two numeric columns x,y (one optional header row)
    pub input: PathBuf,

    /// Polynomial degree of every segment
    #[arg(long)]
    pub degree: usize,

    /// Segment count the pruning starts from
    #[arg(long)]
    pub init_segments: usize,

    /// Stop once every removal would multiply the MSE by more than tau
    #[arg(long, default_value_t = 1.05)]
    pub tau: f64,

    /// Stop once at most this many interior breakpoints remain
    #[arg(long, default_value_t = 0)]
    pub max_bps: usize,

    /// Initialization of the first search round
    #[arg(long, value_enum, default_value_t = InitMode::Uniform)]
    pub init: InitMode,

    /// Seed for random initialization
    #[arg(long)]
    pub seed: Option<u64>,

    /// Smallest segment population the search may visit [default: degree + 1]
    #[arg(long)]
    pub min_seg_points: Option<usize>,

    /// Score sweep proposals on a thread pool (result is identical)
    #[arg(long)]
    pub parallel: bool,

    /// Report destination
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("recipe").required(true).args(["spec", "knots"])))]
pub struct GenerateArgs {
    /// Named recipe; `default` is 400 points on knots 1..400 with sigma 2
    #[arg(long, value_parser = ["default"])]
    pub spec: Option<String>,

    /// Comma-separated knot abscissae, strictly increasing
    #[arg(long, requires_all = ["values", "sigma", "n"])]
    pub knots: Option<String>,

    /// Knot ordinates: a comma-separated list, or `lo..hi` for integers
    /// drawn uniformly from that inclusive range
    #[arg(long, conflicts_with = "spec")]
    pub values: Option<String>,

    /// Noise standard deviation
    #[arg(long, conflicts_with = "spec")]
    pub sigma: Option<f64>,

    /// Number of evenly spaced sample points
    #[arg(long, conflicts_with = "spec")]
    pub n: Option<usize>,

    /// Seed; required whenever the recipe draws anything at random
    #[arg(long)]
    pub seed: Option<u64>,

    /// Redraw ordinates until adjacent segments have distinct slopes
    #[arg(long)]
    pub distinct_slopes: bool,

    /// Data destination CSV
    #[arg(long)]
    pub out: PathBuf,

    /// Optional destination for the generating truth
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV to evaluate against
    pub data: PathBuf,

    /// Report produced by `fit` or `select`
    pub report: PathBuf,
}
