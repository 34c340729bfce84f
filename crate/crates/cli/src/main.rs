//! Command-line surface for the magnetopause modeling pipeline.
//!
//! One binary, eight subcommands: `ingest`, `synth`, `fit`, `mcmc`,
//! `train`, `eval`, `sweep`, `grid`. Every subcommand reads an optional
//! `--config` key-value file, lets explicit flags override it, and echoes
//! the effective configuration next to its outputs so any run can be
//! reproduced from the echoed file alone.
//!
//! Exit codes: 0 on success, 1 when a computation aborts numerically,
//! 2 on usage, parse, or input errors.

/// `println!` that swallows broken-pipe errors instead of panicking, so
/// piping into `head` truncates output gracefully.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigMap;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files; exit code 2.
    Usage(String),
    /// A computation failed numerically; exit code 1.
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<regpinn::Error> for CliError {
    fn from(e: regpinn::Error) -> Self {
        match e {
            regpinn::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "regpinn",
    version,
    about = "Magnetopause boundary models, crossing-data pipeline, and regularized network training"
)]
struct Cli {
    /// Key-value config file; explicit flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every stochastic step of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration and per-row input diagnostics.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge crossing and solar-wind CSVs into a dataset file.
    Ingest(IngestArgs),
    /// Generate a seeded synthetic dataset from an empirical model.
    Synth(SynthArgs),
    /// Fit empirical-form coefficients by damped least squares.
    Fit(FitArgs),
    /// Sample the coefficient posterior by random-walk Metropolis.
    Mcmc(McmcArgs),
    /// Train a network on a dataset, optionally model-regularized.
    Train(TrainArgs),
    /// Score a model on a dataset: overall and per-bin RMSE.
    Eval(EvalArgs),
    /// Train across a list of regularization weights and score each.
    Sweep(SweepArgs),
    /// Tabulate a model's standoff distance over the driver plane.
    Grid(GridArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Crossing list CSV (timestamp,x_gsm_re,y_gsm_re,z_gsm_re,source).
    #[arg(long, value_name = "PATH")]
    crossings: Option<PathBuf>,
    /// Solar-wind CSV (timestamp,bz_nt,dp_npa).
    #[arg(long, value_name = "PATH")]
    solarwind: Option<PathBuf>,
    /// Merged dataset output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Keep only records strictly inside the study driver ranges.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    filter_range: Option<bool>,
    /// Also write the sliding-window (bz, dp) bin table here.
    #[arg(long, value_name = "PATH")]
    bins: Option<PathBuf>,
    /// Bz window width, nT.
    #[arg(long)]
    bz_width: Option<f64>,
    /// Bz window stride, nT.
    #[arg(long)]
    bz_stride: Option<f64>,
    /// Dp window width, nPa.
    #[arg(long)]
    dp_width: Option<f64>,
    /// Dp window stride, nPa.
    #[arg(long)]
    dp_stride: Option<f64>,
    /// Lower edge of the Bz study range, nT.
    #[arg(long)]
    bz_lo: Option<f64>,
    /// Upper edge of the Bz study range, nT.
    #[arg(long)]
    bz_hi: Option<f64>,
    /// Lower edge of the Dp study range, nPa.
    #[arg(long)]
    dp_lo: Option<f64>,
    /// Upper edge of the Dp study range, nPa.
    #[arg(long)]
    dp_hi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generating model: shue or overfit.
    #[arg(long)]
    model: Option<String>,
    /// Number of records.
    #[arg(long)]
    n: Option<usize>,
    /// Gaussian radial noise scale, Re.
    #[arg(long)]
    noise: Option<f64>,
    /// Dataset output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Include the noiseless r_true_re column.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    truth: Option<bool>,
    /// Bz sampling range lower edge, nT.
    #[arg(long)]
    bz_lo: Option<f64>,
    /// Bz sampling range upper edge, nT.
    #[arg(long)]
    bz_hi: Option<f64>,
    /// Dp sampling range lower edge, nPa.
    #[arg(long)]
    dp_lo: Option<f64>,
    /// Dp sampling range upper edge, nPa.
    #[arg(long)]
    dp_hi: Option<f64>,
    /// Zenith-angle sampling range lower edge, radians.
    #[arg(long)]
    theta_lo: Option<f64>,
    /// Zenith-angle sampling range upper edge, radians.
    #[arg(long)]
    theta_hi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Dataset CSV produced by `ingest` or `synth`.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Coefficient form to fit: shue or overfit.
    #[arg(long)]
    form: Option<String>,
    /// Comma-separated names of the coefficients left free (default all).
    #[arg(long)]
    free: Option<String>,
    /// Comma-separated starting coefficients (default: published values).
    #[arg(long)]
    init: Option<String>,
    /// Half-width of the coefficient bounds, relative to the start.
    #[arg(long)]
    bound_scale: Option<f64>,
    /// Convergence tolerance on relative SSE decrease and step norm.
    #[arg(long)]
    tol: Option<f64>,
    /// Outer iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Fit report output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct McmcArgs {
    /// Dataset CSV produced by `ingest` or `synth`.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Coefficient form to sample: shue or overfit.
    #[arg(long)]
    form: Option<String>,
    /// Comma-separated names of the coefficients left free (default all).
    #[arg(long)]
    free: Option<String>,
    /// Comma-separated starting coefficients (default: published values).
    #[arg(long)]
    init: Option<String>,
    /// Half-width of the coefficient bounds, relative to the start.
    #[arg(long)]
    bound_scale: Option<f64>,
    /// Chain length.
    #[arg(long)]
    steps: Option<usize>,
    /// Steps excluded from the posterior summaries.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Comma-separated per-free-coefficient proposal scales.
    #[arg(long)]
    proposal: Option<String>,
    /// Observation-noise scale, Re (default: estimated from the start).
    #[arg(long)]
    likelihood_sigma: Option<f64>,
    /// Chain CSV output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Training hyperparameters shared by `train` and `sweep`.
#[derive(Args, Debug)]
pub struct TrainFlags {
    /// Dataset CSV produced by `ingest` or `synth`.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// RMSProp learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stop threshold on the training loss (0 disables).
    #[arg(long)]
    threshold: Option<f64>,
    /// Train-split fraction, in (0, 1).
    #[arg(long)]
    split: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Weight penalty: none, l1, l2, or elastic.
    #[arg(long)]
    penalty: Option<String>,
    /// Penalty strength (used unless the penalty is none).
    #[arg(long)]
    penalty_strength: Option<f64>,
    /// L1 share of the elastic penalty, in [0, 1].
    #[arg(long)]
    elastic_mix: Option<f64>,
    /// Regularizing empirical model: none, shue, or overfit.
    #[arg(long)]
    reg: Option<String>,
    /// Comma-separated layer sizes, input to output.
    #[arg(long)]
    layers: Option<String>,
    /// RMSProp gradient-average decay, in [0, 1).
    #[arg(long)]
    rmsprop_decay: Option<f64>,
    /// RMSProp stabilizer added to the root-mean-square.
    #[arg(long)]
    rmsprop_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    train: TrainFlags,
    /// Regularization weight on l_reg.
    #[arg(long)]
    lambda: Option<f64>,
    /// Run directory for loss curves, model artifact, and config echo.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset CSV produced by `ingest` or `synth`.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Model to score: shue, overfit, or a model artifact path.
    #[arg(long)]
    model: Option<String>,
    /// Report CSV output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    train: TrainFlags,
    /// Comma-separated regularization weights to sweep.
    #[arg(long)]
    lambdas: Option<String>,
    /// Sweep table output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Model to tabulate: shue, overfit, or a model artifact path.
    #[arg(long)]
    model: Option<String>,
    /// Bz axis lower edge, nT.
    #[arg(long)]
    bz_lo: Option<f64>,
    /// Bz axis upper edge, nT.
    #[arg(long)]
    bz_hi: Option<f64>,
    /// Dp axis lower edge, nPa.
    #[arg(long)]
    dp_lo: Option<f64>,
    /// Dp axis upper edge, nPa.
    #[arg(long)]
    dp_hi: Option<f64>,
    /// Bz axis sample count.
    #[arg(long)]
    n_bz: Option<usize>,
    /// Dp axis sample count.
    #[arg(long)]
    n_dp: Option<usize>,
    /// Grid CSV output path (a .json sidecar lands next to it).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Global state shared by every subcommand.
pub struct Context {
    pub config: Option<ConfigMap>,
    pub seed_flag: Option<u64>,
    pub verbose: bool,
}

impl Context {
    /// Validate config keys against the running subcommand's vocabulary.
    fn check_keys(&self, command: &str, known: &[&str]) -> Result<(), CliError> {
        match &self.config {
            Some(map) => map.check_keys(command, known),
            None => Ok(()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Some(ConfigMap::load(path)?),
        None => None,
    };
    let ctx = Context {
        config,
        seed_flag: cli.seed,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Ingest(args) => commands::cmd_ingest(args, &ctx),
        Command::Synth(args) => commands::cmd_synth(args, &ctx),
        Command::Fit(args) => commands::cmd_fit(args, &ctx),
        Command::Mcmc(args) => commands::cmd_mcmc(args, &ctx),
        Command::Train(args) => commands::cmd_train(args, &ctx),
        Command::Eval(args) => commands::cmd_eval(args, &ctx),
        Command::Sweep(args) => commands::cmd_sweep(args, &ctx),
        Command::Grid(args) => commands::cmd_grid(args, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
