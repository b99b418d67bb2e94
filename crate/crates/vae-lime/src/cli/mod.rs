//! Command-line interface: argument parsing, config-file merging, exit
//! codes.
//!
//! Five subcommands cover the pipeline: `gen-data`, `train-vae`,
//! `train-blackbox`, `explain`, `benchmark`. Every subcommand accepts
//! `--config <json>` whose keys mirror the flag names (snake_case); flags
//! override config values, and built-in defaults fill the rest. Exit
//! codes: 0 success, 2 usage or config errors, 3 runtime failures.

mod commands;
pub mod model_json;

pub use commands::{
    explain_one, meta_block, meta_sidecar_path, run_benchmark, select_instances,
    write_benchmark_csv, BenchmarkOutcome, BenchmarkPlan, BenchmarkRow, BenchmarkSummary,
    ExplainContext, ExplainOutput, ExplainSettings, MethodSummary, SelectionMode,
    BENCHMARK_CSV_HEADER, TOOL_VERSION,
};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::blackbox::AnalyticSpec;
use crate::dataio::{Mixing, SynthConfig, TargetSpec};
use crate::error::{Error, Result};
use crate::surrogate::Method;

const DEFAULT_ROWS: usize = 5000;
const DEFAULT_FEATURES: usize = 12;
const DEFAULT_LATENT_RANK: usize = 3;
const DEFAULT_AR_COEFFICIENT: f64 = 0.9;
const DEFAULT_NOISE_STD: f64 = 0.1;
const DEFAULT_MIXING_SEED: u64 = 1234;
const DEFAULT_TARGET_C: [f64; 3] = [1.0, 1.0, 0.5];
const DEFAULT_TARGET_NOISE_STD: f64 = 0.1;
const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
const DEFAULT_N_SAMPLES: usize = 1000;
const DEFAULT_SIGMA_SCALE: f64 = 1.0;
const DEFAULT_RIDGE_LAMBDA: f64 = 1e-6;
const DEFAULT_TOP_K: usize = 10;
const DEFAULT_INSTANCES: usize = 50;

#[derive(Parser)]
#[command(
    name = "vae-lime",
    version,
    about = "Local explanations for black-box regressors: VAE-guided sampling vs classic LIME"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic correlated dataset as CSV.
    GenData(GenDataArgs),
    /// Train the VAE sampler and save it as a JSON model.
    TrainVae(TrainVaeArgs),
    /// Train the MLP black-box regressor and save it as a JSON model.
    TrainBlackbox(TrainBlackboxArgs),
    /// Explain one instance and emit the surrogate report as JSON.
    Explain(ExplainArgs),
    /// Compare vae-lime and lime over a pool of test instances.
    Benchmark(BenchmarkArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    VaeLime,
    Lime,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::VaeLime => Method::VaeLime,
            MethodArg::Lime => Method::Lime,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SelectArg {
    Chronological,
    Random,
}

impl From<SelectArg> for SelectionMode {
    fn from(s: SelectArg) -> SelectionMode {
        match s {
            SelectArg::Chronological => SelectionMode::Chronological,
            SelectArg::Random => SelectionMode::Random,
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// RNG seed for the data draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Number of rows T.
    #[arg(long)]
    rows: Option<usize>,
    /// Number of observed features d.
    #[arg(long)]
    features: Option<usize>,
    /// Number of latent AR(1) factors k.
    #[arg(long)]
    latent_rank: Option<usize>,
    /// AR(1) coefficient of the factors, in [0, 1).
    #[arg(long)]
    ar_coefficient: Option<f64>,
    /// Observation noise std.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Seed of the mixing matrix; stable across data seeds.
    #[arg(long)]
    mixing_seed: Option<u64>,
    /// Noise std added to the synthetic target.
    #[arg(long)]
    target_noise_std: Option<f64>,
}

#[derive(Args)]
struct TrainVaeArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for init, shuffling, and reparameterization draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Output model JSON path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Training CSV (only the chronological train split is used).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Chronological fraction of rows to train on.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Latent dimension L; defaults to max(2, ceil(d/4)).
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Width of the single hidden layer on each side.
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Weight on the KL term of the loss.
    #[arg(long)]
    kl_weight: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct TrainBlackboxArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for init and minibatch shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output model JSON path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Training CSV with a `target` column.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Chronological fraction to fit on; the tail is the holdout.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Args)]
struct ExplainArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed of the neighborhood draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Dataset CSV the instance is taken from.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Black-box model JSON.
    #[arg(long, value_name = "PATH")]
    blackbox: Option<PathBuf>,
    /// VAE model JSON (required for method vae-lime).
    #[arg(long, value_name = "PATH")]
    vae: Option<PathBuf>,
    /// Explanation method.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Row index of the instance to explain.
    #[arg(long)]
    row: Option<usize>,
    /// Number of neighborhood samples N.
    #[arg(long)]
    n: Option<usize>,
    /// Multiplier on the VAE's stored latent sigma.
    #[arg(long)]
    sigma_scale: Option<f64>,
    /// LIME kernel width; defaults to 0.75*sqrt(d).
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Ridge strength of the weighted fit.
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// How many top features to rank in the report.
    #[arg(long)]
    top_k: Option<usize>,
    /// Chronological fraction treated as training data for feature stats.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; instance i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Black-box model JSON.
    #[arg(long, value_name = "PATH")]
    blackbox: Option<PathBuf>,
    /// VAE model JSON.
    #[arg(long, value_name = "PATH")]
    vae: Option<PathBuf>,
    /// How many test instances to explain.
    #[arg(long)]
    instances: Option<usize>,
    /// How instances are drawn from the test pool.
    #[arg(long, value_enum)]
    select: Option<SelectArg>,
    /// Number of neighborhood samples N per explanation.
    #[arg(long)]
    n: Option<usize>,
    /// Multiplier on the VAE's stored latent sigma.
    #[arg(long)]
    sigma_scale: Option<f64>,
    /// LIME kernel width; defaults to 0.75*sqrt(d).
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Ridge strength of the weighted fit.
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// How many top features each explanation ranks.
    #[arg(long)]
    top_k: Option<usize>,
    /// Chronological fraction treated as training data.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Report wall_ms as 0 so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

/// Config-file shape: one flat object whose keys mirror the flag names.
/// Keys irrelevant to the invoked subcommand are ignored; unknown keys are
/// rejected to catch typos.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    rows: Option<usize>,
    features: Option<usize>,
    latent_rank: Option<usize>,
    ar_coefficient: Option<f64>,
    noise_std: Option<f64>,
    mixing_seed: Option<u64>,
    identity_mixing: Option<bool>,
    target_c: Option<[f64; 3]>,
    target_linear: Option<Vec<f64>>,
    target_noise_std: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    latent_dim: Option<usize>,
    hidden_width: Option<usize>,
    kl_weight: Option<f64>,
    learning_rate: Option<f64>,
    train_fraction: Option<f64>,
    mlp_hidden: Option<[usize; 2]>,
    method: Option<String>,
    vae: Option<PathBuf>,
    blackbox: Option<PathBuf>,
    row: Option<usize>,
    n: Option<usize>,
    sigma_scale: Option<f64>,
    kernel_width: Option<f64>,
    ridge_lambda: Option<f64>,
    top_k: Option<usize>,
    instances: Option<usize>,
    select: Option<String>,
    no_timing: Option<bool>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let body = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&body).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidConfig(format!("{what} is required (flag or config-file key)"))
    })
}

fn parse_method(name: &str) -> Result<Method> {
    match name {
        "vae-lime" => Ok(Method::VaeLime),
        "lime" => Ok(Method::Lime),
        other => Err(Error::InvalidConfig(format!(
            "unknown method `{other}` (expected vae-lime or lime)"
        ))),
    }
}

fn parse_select(name: &str) -> Result<SelectionMode> {
    match name {
        "chronological" => Ok(SelectionMode::Chronological),
        "random" => Ok(SelectionMode::Random),
        other => Err(Error::InvalidConfig(format!(
            "unknown select mode `{other}` (expected chronological or random)"
        ))),
    }
}

/// Default linear tail of the synthetic target: alternating signs with
/// geometric decay, so every feature carries signal of distinct size.
fn default_target_linear(n_features: usize) -> Vec<f64> {
    (0..n_features.saturating_sub(4))
        .map(|j| (-0.8f64).powi(j as i32))
        .collect()
}

fn resolve_gen_data(args: GenDataArgs) -> Result<commands::GenDataCmd> {
    let cfg = load_file_config(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let out = require(args.out.or(cfg.out), "--out")?;
    let n_features = args.features.or(cfg.features).unwrap_or(DEFAULT_FEATURES);
    let mixing = if cfg.identity_mixing == Some(true) {
        Mixing::Identity
    } else {
        Mixing::Seeded {
            seed: args
                .mixing_seed
                .or(cfg.mixing_seed)
                .unwrap_or(DEFAULT_MIXING_SEED),
        }
    };
    let c = cfg.target_c.unwrap_or(DEFAULT_TARGET_C);
    let linear = cfg
        .target_linear
        .clone()
        .unwrap_or_else(|| default_target_linear(n_features));
    let analytic = AnalyticSpec::new(c, linear)?;
    let synth = SynthConfig {
        n_rows: args.rows.or(cfg.rows).unwrap_or(DEFAULT_ROWS),
        n_features,
        latent_rank: args
            .latent_rank
            .or(cfg.latent_rank)
            .unwrap_or(DEFAULT_LATENT_RANK),
        ar_coefficient: args
            .ar_coefficient
            .or(cfg.ar_coefficient)
            .unwrap_or(DEFAULT_AR_COEFFICIENT),
        noise_std: args
            .noise_std
            .or(cfg.noise_std)
            .unwrap_or(DEFAULT_NOISE_STD),
        mixing,
        target: Some(TargetSpec {
            analytic,
            noise_std: args
                .target_noise_std
                .or(cfg.target_noise_std)
                .unwrap_or(DEFAULT_TARGET_NOISE_STD),
        }),
    };
    Ok(commands::GenDataCmd { out, seed, synth })
}

fn resolve_train_vae(args: TrainVaeArgs) -> Result<commands::TrainVaeCmd> {
    let cfg = load_file_config(args.config.as_deref())?;
    Ok(commands::TrainVaeCmd {
        data: require(args.data.or(cfg.data), "--data")?,
        out: require(args.out.or(cfg.out), "--out")?,
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        train_fraction: args
            .train_fraction
            .or(cfg.train_fraction)
            .unwrap_or(DEFAULT_TRAIN_FRACTION),
        epochs: args.epochs.or(cfg.epochs),
        batch_size: args.batch_size.or(cfg.batch_size),
        latent_dim: args.latent_dim.or(cfg.latent_dim),
        hidden_width: args.hidden_width.or(cfg.hidden_width),
        kl_weight: args.kl_weight.or(cfg.kl_weight),
        learning_rate: args.learning_rate.or(cfg.learning_rate),
    })
}

fn resolve_train_blackbox(args: TrainBlackboxArgs) -> Result<commands::TrainBlackboxCmd> {
    let cfg = load_file_config(args.config.as_deref())?;
    Ok(commands::TrainBlackboxCmd {
        data: require(args.data.or(cfg.data), "--data")?,
        out: require(args.out.or(cfg.out), "--out")?,
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        train_fraction: args
            .train_fraction
            .or(cfg.train_fraction)
            .unwrap_or(DEFAULT_TRAIN_FRACTION),
        epochs: args.epochs.or(cfg.epochs),
        batch_size: args.batch_size.or(cfg.batch_size),
        learning_rate: args.learning_rate.or(cfg.learning_rate),
        hidden: cfg.mlp_hidden.map(|h| (h[0], h[1])),
    })
}

fn resolve_explain(args: ExplainArgs) -> Result<commands::ExplainCmd> {
    let cfg = load_file_config(args.config.as_deref())?;
    let method = match args.method {
        Some(m) => Method::from(m),
        None => parse_method(&require(cfg.method.clone(), "--method")?)?,
    };
    Ok(commands::ExplainCmd {
        data: require(args.data.or(cfg.data), "--data")?,
        blackbox: require(args.blackbox.or(cfg.blackbox), "--blackbox")?,
        vae: args.vae.or(cfg.vae),
        out: args.out.or(cfg.out),
        method,
        row: require(args.row.or(cfg.row), "--row")?,
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        train_fraction: args
            .train_fraction
            .or(cfg.train_fraction)
            .unwrap_or(DEFAULT_TRAIN_FRACTION),
        n_samples: args.n.or(cfg.n).unwrap_or(DEFAULT_N_SAMPLES),
        sigma_scale: args
            .sigma_scale
            .or(cfg.sigma_scale)
            .unwrap_or(DEFAULT_SIGMA_SCALE),
        kernel_width: args.kernel_width.or(cfg.kernel_width),
        ridge_lambda: args
            .ridge_lambda
            .or(cfg.ridge_lambda)
            .unwrap_or(DEFAULT_RIDGE_LAMBDA),
        top_k: args.top_k.or(cfg.top_k).unwrap_or(DEFAULT_TOP_K),
    })
}

fn resolve_benchmark(args: BenchmarkArgs) -> Result<commands::BenchmarkCmd> {
    let cfg = load_file_config(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let select = match args.select {
        Some(s) => SelectionMode::from(s),
        None => match &cfg.select {
            Some(s) => parse_select(s)?,
            None => SelectionMode::Chronological,
        },
    };
    let plan = BenchmarkPlan {
        instances: args
            .instances
            .or(cfg.instances)
            .unwrap_or(DEFAULT_INSTANCES),
        select,
        train_fraction: args
            .train_fraction
            .or(cfg.train_fraction)
            .unwrap_or(DEFAULT_TRAIN_FRACTION),
        n_samples: args.n.or(cfg.n).unwrap_or(DEFAULT_N_SAMPLES),
        sigma_scale: args
            .sigma_scale
            .or(cfg.sigma_scale)
            .unwrap_or(DEFAULT_SIGMA_SCALE),
        kernel_width: args.kernel_width.or(cfg.kernel_width),
        ridge_lambda: args
            .ridge_lambda
            .or(cfg.ridge_lambda)
            .unwrap_or(DEFAULT_RIDGE_LAMBDA),
        top_k: args.top_k.or(cfg.top_k).unwrap_or(DEFAULT_TOP_K),
        seed,
        measure_time: !(args.no_timing || cfg.no_timing.unwrap_or(false)),
    };
    Ok(commands::BenchmarkCmd {
        data: require(args.data.or(cfg.data), "--data")?,
        blackbox: require(args.blackbox.or(cfg.blackbox), "--blackbox")?,
        vae: require(args.vae.or(cfg.vae), "--vae")?,
        out: require(args.out.or(cfg.out), "--out")?,
        seed,
        plan,
    })
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::GenData(args) => {
            commands::cmd_gen_data(&resolve_gen_data(args)?)?;
            Ok(0)
        }
        Command::TrainVae(args) => {
            commands::cmd_train_vae(&resolve_train_vae(args)?)?;
            Ok(0)
        }
        Command::TrainBlackbox(args) => {
            commands::cmd_train_blackbox(&resolve_train_blackbox(args)?)?;
            Ok(0)
        }
        Command::Explain(args) => {
            commands::cmd_explain(&resolve_explain(args)?)?;
            Ok(0)
        }
        Command::Benchmark(args) => commands::cmd_benchmark(&resolve_benchmark(args)?),
    }
}

/// Parses `args` and runs the selected command, returning the process
/// exit code instead of exiting, so tests can drive the full path.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
