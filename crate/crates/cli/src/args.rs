use std::path::PathBuf;

use bivmac::acceptance::DEFAULT_SEED;
use bivmac::vq_sim::DEFAULT_DELTA_TYP;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Distortion bounds and simulations for a correlated Gaussian source pair
/// sent over a two-user Gaussian multiple-access channel.
#[derive(Debug, Parser)]
#[command(name = "bivmac", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format; point queries default to json, sweeps to csv.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outer-bound test and verdict for a target distortion pair.
    Bounds {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        d1: f64,
        #[arg(long)]
        d2: f64,
    },
    /// Closed-form distortions of uncoded transmission.
    Uncoded {
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Monte Carlo estimate for uncoded transmission.
    SimulateUncoded {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Number of source symbols.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Quantizer-scheme distortions; without rates, the best common rate for equal powers.
    VqBound {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, requires = "r2")]
        r1: Option<f64>,
        #[arg(long, requires = "r1")]
        r2: Option<f64>,
    },
    /// Blocklength-n simulation of the quantizer scheme.
    SimulateVq {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        /// Blocklength.
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Half-width of the decoder's codeword-correlation window.
        #[arg(long, default_value_t = DEFAULT_DELTA_TYP)]
        delta_typ: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Equal-power bounds over an SNR grid, or a distortion-region boundary.
    Sweep(SweepArgs),
    /// Run the self-check suite and print a pass/fail table.
    Verify {
        #[command(flatten)]
        seed: SeedArg,
    },
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Common source variance.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Variance of the first component (overrides --sigma2).
    #[arg(long)]
    pub var1: Option<f64>,
    /// Variance of the second component (overrides --sigma2).
    #[arg(long)]
    pub var2: Option<f64>,
    /// Source correlation coefficient.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p2: f64,
    /// Channel noise variance.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "BIVMAC_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Equal powers, noise variance 1, one row per grid SNR.
    Snr,
    /// Outer and inner d2 frontiers over a grid of d1.
    Boundary,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepKind::Snr)]
    pub kind: SweepKind,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// `start:stop:count:log|lin` over P/N.
    #[arg(long, default_value = "0.1:100:50:log")]
    pub snr_grid: String,
    /// Number of d1 grid points for boundary traces.
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Replace inner bounds by their time-sharing (lower convex) envelope.
    #[arg(long)]
    pub convexify: bool,
}
