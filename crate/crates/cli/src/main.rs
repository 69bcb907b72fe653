//! `wsf`: fit, cross-validate and simulate weighted spectral filters on S².
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when the computation fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "wsf",
    version,
    about = "Weighted spectral filters for noisy data on the sphere"
)]
pub struct Cli {
    /// Worker threads for candidate fits (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML file whose keys mirror the long flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one model and optionally predict at new points.
    Fit(FitArgs),
    /// Choose a filter parameter by weighted validation.
    Cv(CvArgs),
    /// Run one of the simulation scenarios and write a results table.
    Simulate(SimulateArgs),
    /// Fit lat/lon data with synthetic noise and k-fold parameter choice.
    Real(RealArgs),
    /// Report geometry, quadrature and conditioning of a point set.
    Diagnose(DiagnoseArgs),
    /// Compute positive quadrature weights for a point set.
    Quadrature(QuadratureArgs),
    /// Generate a symmetric spherical t-design.
    Design(DesignArgs),
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// wendland_4_1 or wendland_8_3.
    #[arg(long)]
    kernel: Option<String>,
    /// Support radius in chord units.
    #[arg(long)]
    support: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Training file with `x y z value` rows.
    #[arg(long)]
    points: PathBuf,
    /// ki, tikhonov, landweber or cutoff.
    #[arg(long, default_value = "tikhonov")]
    filter: String,
    /// Filter parameter (μ, ν, or 1/l for Landweber).
    #[arg(long, conflicts_with = "ratio")]
    param: Option<f64>,
    /// Filter parameter as a fraction of the largest eigenvalue κ of Ψ.
    #[arg(long, conflicts_with = "param_l")]
    ratio: Option<f64>,
    /// Landweber iteration count, in place of `--param 1/l`.
    #[arg(long, conflicts_with = "param")]
    param_l: Option<u64>,
    /// Quadrature rule file; computed on the training points when absent.
    #[arg(long, conflicts_with = "degree")]
    quadrature: Option<PathBuf>,
    /// Quadrature degree, or `auto`.
    #[arg(long, default_value = "auto")]
    degree: String,
    /// Points to predict at (`x y z` or `x y z truth`).
    #[arg(long)]
    eval_points: Option<PathBuf>,
    /// Prediction CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coefficient file of the fitted model.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    /// Training file with `x y z value` rows.
    #[arg(long)]
    points: PathBuf,
    /// Separate validation file with `x y z value` rows.
    #[arg(long, conflicts_with = "split")]
    val_points: Option<PathBuf>,
    /// Training fraction of a random split of `--points`.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// tikhonov, landweber or cutoff.
    #[arg(long, default_value = "tikhonov")]
    filter: String,
    /// `auto` for {κ, κ/2, …, κ/⌈√n⌉}, or a comma-separated list of parameters.
    #[arg(long, default_value = "auto")]
    grid: String,
    /// Per-candidate score table.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// sim1 … sim6.
    #[arg(long)]
    scenario: Option<String>,
    /// random, tdesign or rotation.
    #[arg(long)]
    sampler: Option<String>,
    /// Sizes: t for designs, copies for rotation, point counts for random.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Noise levels δ.
    #[arg(long = "delta", value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Filter families to run.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    /// Leave out kernel interpolation.
    #[arg(long)]
    no_ki: bool,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Strength of the validation design.
    #[arg(long)]
    validation_t: Option<usize>,
    /// Noise truncation bound.
    #[arg(long)]
    truncation: Option<f64>,
    /// Quadrature degree on non-design training sets.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Directory holding the shipped designs.
    #[arg(long)]
    design_dir: Option<PathBuf>,
    /// Fill the wall_ms column (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
    /// Directory for prediction dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct RealArgs {
    /// Training CSV with lat_deg, lon_deg and a value column.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test CSV in the same layout.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Validation CSV; switches from k-fold to weighted validation.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    value_column: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Noise truncation bound (default 5δ).
    #[arg(long)]
    truncation: Option<f64>,
    /// Clamp negative predictions to zero.
    #[arg(long)]
    clamp_zero: bool,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    #[arg(long)]
    no_ki: bool,
    #[arg(long)]
    quad_degree: Option<usize>,
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Point file (`x y z` or `x y z value`).
    #[arg(long)]
    points: PathBuf,
    /// Quadrature degree, or `auto`.
    #[arg(long, default_value = "auto")]
    degree: String,
    /// Also report the filtered condition number for this filter.
    #[arg(long, requires = "ratio")]
    filter: Option<String>,
    /// Filter parameter as a fraction of κ.
    #[arg(long)]
    ratio: Option<f64>,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
pub struct QuadratureArgs {
    #[arg(long)]
    points: PathBuf,
    /// Exactness degree, or `auto` for the highest feasible one.
    #[arg(long, default_value = "auto")]
    degree: String,
    /// Rule file (`x y z w` rows under `# degree=`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Strength t.
    #[arg(long)]
    t: usize,
    /// Point count; the smallest workable even count when absent.
    #[arg(long)]
    points: Option<usize>,
    /// Build from orbits of the octahedral rotation group instead.
    #[arg(long)]
    orbits: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
