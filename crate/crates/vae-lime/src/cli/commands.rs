//! Command implementations behind the argument parser.
//!
//! Everything here is callable as a library: `explain_one` is the shared
//! single-instance pipeline and `run_benchmark` the paired comparison over
//! a test pool. The `cmd_*` functions add artifact writing on top. Output
//! rules: JSON artifacts embed a `meta` block {tool_version, command, seed,
//! config}; CSV artifacts get the same block as a `<file>.meta.json`
//! sidecar so the CSV contract stays plain columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::blackbox::{train_mlp_regressor, BlackBox, MlpTrainConfig};
use crate::cli::model_json::{
    blackbox_from_file, blackbox_to_file, read_model, vae_from_file, vae_to_file, write_model,
};
use crate::dataio::{
    generate, load_csv, split, write_csv, Dataset, SplitMode, Standardization, SynthConfig,
};
use crate::error::{Error, Result};
use crate::sampler::{build_lime_set, build_vae_lime_set, ExplainConfig};
use crate::surrogate::{
    fidelity, fit_surrogate, rank_importance, Explanation, Method, WeightsSummary,
};
use crate::vae::{train_vae, EpochLoss, VaeModel, VaeTrainConfig, VaeTraining};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The reproducibility block embedded in every artifact.
pub fn meta_block(command: &str, seed: u64, config: Value) -> Value {
    json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "seed": seed,
        "config": config,
    })
}

/// `<path>.meta.json`, the sidecar carrying the meta block for CSV outputs.
pub fn meta_sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, body + "\n").map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Shared explanation pipeline.

/// Immutable inputs shared by every instance of one explain/benchmark run.
#[derive(Debug)]
pub struct ExplainContext<'a> {
    pub vae: Option<&'a VaeModel>,
    pub blackbox: &'a BlackBox,
    pub feature_names: &'a [String],
    /// Per-feature stds of the training split, floored like
    /// `Standardization::from_stats`. Drive LIME's perturbations and the
    /// standardized-coefficient view.
    pub train_stds: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct ExplainSettings {
    pub n_samples: usize,
    /// Multiplies the VAE's stored per-dimension latent sigma.
    pub sigma_scale: f64,
    /// Exponential kernel width; defaults to 0.75·sqrt(d) when None.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub top_k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExplainOutput {
    pub explanation: Explanation,
    /// Coefficients scaled by the training std of their feature, i.e. the
    /// surrogate response to a one-std move.
    pub standardized_coefficients: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub outputs: Vec<f64>,
}

/// Runs one method on one instance: sample a neighborhood, weight it,
/// query the black box, fit the weighted surrogate, measure fidelity.
pub fn explain_one(
    ctx: &ExplainContext,
    method: Method,
    instance_id: usize,
    x_test: &[f64],
    settings: &ExplainSettings,
) -> Result<ExplainOutput> {
    let d = ctx.blackbox.input_dim();
    let kernel_width = settings
        .kernel_width
        .unwrap_or_else(|| ExplainConfig::default_kernel_width(d));

    let (set, outputs) = match method {
        Method::VaeLime => {
            let vae = ctx.vae.ok_or_else(|| {
                Error::InvalidConfig("method vae-lime requires a VAE model (--vae)".into())
            })?;
            if !(settings.sigma_scale > 0.0 && settings.sigma_scale.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sigma-scale must be positive and finite, got {}",
                    settings.sigma_scale
                )));
            }
            let sigma: Vec<f64> = vae
                .latent_sigma
                .iter()
                .map(|s| s * settings.sigma_scale)
                .collect();
            let config = ExplainConfig {
                n_samples: settings.n_samples,
                sigma,
                kernel_width,
                ridge_lambda: settings.ridge_lambda,
                seed: settings.seed,
            };
            build_vae_lime_set(vae, ctx.blackbox, x_test, &config)?
        }
        Method::Lime => {
            let config = ExplainConfig {
                n_samples: settings.n_samples,
                // Unused by the classic path; kept valid for the shared
                // config validation.
                sigma: vec![1.0],
                kernel_width,
                ridge_lambda: settings.ridge_lambda,
                seed: settings.seed,
            };
            build_lime_set(ctx.blackbox, x_test, ctx.train_stds, &config)?
        }
    };

    let surrogate = fit_surrogate(&set.samples, &outputs, &set.weights, settings.ridge_lambda)?;
    let report = fidelity(&surrogate, ctx.blackbox, &set.samples, x_test)?;
    let top_k = rank_importance(&surrogate, ctx.feature_names, settings.top_k);
    let standardized_coefficients: Vec<f64> = surrogate
        .coefficients
        .iter()
        .zip(ctx.train_stds)
        .map(|(c, s)| c * s)
        .collect();
    let weights_summary = WeightsSummary::of(&set.weights);
    Ok(ExplainOutput {
        explanation: Explanation {
            method,
            instance_id,
            surrogate,
            top_k,
            weights_summary,
            fidelity: report,
        },
        standardized_coefficients,
        samples: set.samples,
        weights: set.weights,
        outputs,
    })
}

// ---------------------------------------------------------------------------
// Benchmark runner.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// First `instances` rows of the test pool, in time order.
    Chronological,
    /// Seeded draw without replacement from the whole pool.
    Random,
}

impl SelectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMode::Chronological => "chronological",
            SelectionMode::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkPlan {
    pub instances: usize,
    pub select: SelectionMode,
    /// Chronological fraction treated as training data; instances are
    /// drawn from the remaining tail.
    pub train_fraction: f64,
    pub n_samples: usize,
    pub sigma_scale: f64,
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub top_k: usize,
    pub seed: u64,
    /// When false, wall_ms is reported as 0 so reruns are byte-identical.
    pub measure_time: bool,
}

/// One CSV row of the benchmark output. Failure rows carry NaN metrics.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub instance_id: usize,
    pub method: Method,
    pub local_mse: f64,
    pub r2: f64,
    pub abs_error_at_x: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub mean_local_mse: f64,
    pub median_local_mse: f64,
    pub mean_r2: f64,
    pub median_r2: f64,
    pub mean_abs_error_at_x: f64,
    pub median_abs_error_at_x: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub instances: usize,
    pub failures: usize,
    pub vae_lime: MethodSummary,
    pub lime: MethodSummary,
    /// Fraction of instances where VAE-LIME's local_mse beat LIME's,
    /// among instances where both methods succeeded.
    pub vae_lime_mse_win_fraction: f64,
}

pub struct BenchmarkOutcome {
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
    /// Human-readable description of each failed (instance, method) pair.
    pub errors: Vec<String>,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median over finite values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn summarize_method(rows: &[&BenchmarkRow]) -> MethodSummary {
    let ok: Vec<&&BenchmarkRow> = rows.iter().filter(|r| r.local_mse.is_finite()).collect();
    let pick = |f: fn(&BenchmarkRow) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let mse = pick(|r| r.local_mse);
    let r2 = pick(|r| r.r2);
    let abs = pick(|r| r.abs_error_at_x);
    let wall = pick(|r| r.wall_ms);
    MethodSummary {
        mean_local_mse: mean(&mse),
        median_local_mse: median(&mse),
        mean_r2: mean(&r2),
        median_r2: median(&r2),
        mean_abs_error_at_x: mean(&abs),
        median_abs_error_at_x: median(&abs),
        mean_wall_ms: mean(&wall),
    }
}

/// Picks `instances` row indices from the tail pool `[n_train, n_rows)`.
pub fn select_instances(
    n_rows: usize,
    n_train: usize,
    instances: usize,
    select: SelectionMode,
    seed: u64,
) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (n_train..n_rows).collect();
    if instances == 0 {
        return Err(Error::InvalidConfig("instances must be >= 1".into()));
    }
    if instances > pool.len() {
        return Err(Error::InvalidConfig(format!(
            "requested {instances} test instances but the pool past the training split has only {}",
            pool.len()
        )));
    }
    match select {
        SelectionMode::Chronological => Ok(pool[..instances].to_vec()),
        SelectionMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = pool;
            shuffled.shuffle(&mut rng);
            let mut chosen = shuffled[..instances].to_vec();
            chosen.sort_unstable();
            Ok(chosen)
        }
    }
}

/// Runs both methods over the selected instances with matched seeds
/// (base seed + instance id) and matched N, collecting one row per
/// (instance, method). Rows come back sorted by (instance_id, method).
pub fn run_benchmark(
    data: &Dataset,
    vae: &VaeModel,
    blackbox: &BlackBox,
    plan: &BenchmarkPlan,
) -> Result<BenchmarkOutcome> {
    let (train, _) = split(
        data,
        plan.train_fraction,
        plan.seed,
        SplitMode::Chronological,
    )?;
    let selected = select_instances(
        data.n_rows(),
        train.n_rows(),
        plan.instances,
        plan.select,
        plan.seed,
    )?;
    let stds = Standardization::from_stats(train.stats()).stds;
    let ctx = ExplainContext {
        vae: Some(vae),
        blackbox,
        feature_names: data.feature_names(),
        train_stds: &stds,
    };

    let mut rows = Vec::with_capacity(2 * selected.len());
    let mut errors = Vec::new();
    for &id in &selected {
        let settings = ExplainSettings {
            n_samples: plan.n_samples,
            sigma_scale: plan.sigma_scale,
            kernel_width: plan.kernel_width,
            ridge_lambda: plan.ridge_lambda,
            top_k: plan.top_k,
            seed: plan.seed.wrapping_add(id as u64),
        };
        for method in [Method::VaeLime, Method::Lime] {
            let started = Instant::now();
            let result = explain_one(&ctx, method, id, data.row(id), &settings);
            let wall_ms = if plan.measure_time {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            match result {
                Ok(output) => rows.push(BenchmarkRow {
                    instance_id: id,
                    method,
                    local_mse: output.explanation.fidelity.local_mse,
                    r2: output.explanation.fidelity.r2,
                    abs_error_at_x: output.explanation.fidelity.abs_error_at_x,
                    wall_ms,
                }),
                Err(err) => {
                    errors.push(format!("instance {id}, method {method}: {err}"));
                    rows.push(BenchmarkRow {
                        instance_id: id,
                        method,
                        local_mse: f64::NAN,
                        r2: f64::NAN,
                        abs_error_at_x: f64::NAN,
                        wall_ms,
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.instance_id, a.method.as_str()).cmp(&(b.instance_id, b.method.as_str()))
    });

    let vae_rows: Vec<&BenchmarkRow> = rows
        .iter()
        .filter(|r| r.method == Method::VaeLime)
        .collect();
    let lime_rows: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.method == Method::Lime).collect();
    let mut wins = 0usize;
    let mut both_ok = 0usize;
    for &id in &selected {
        let v = vae_rows.iter().find(|r| r.instance_id == id);
        let l = lime_rows.iter().find(|r| r.instance_id == id);
        if let (Some(v), Some(l)) = (v, l) {
            if v.local_mse.is_finite() && l.local_mse.is_finite() {
                both_ok += 1;
                if v.local_mse < l.local_mse {
                    wins += 1;
                }
            }
        }
    }
    let summary = BenchmarkSummary {
        instances: selected.len(),
        failures: errors.len(),
        vae_lime: summarize_method(&vae_rows),
        lime: summarize_method(&lime_rows),
        vae_lime_mse_win_fraction: if both_ok > 0 {
            wins as f64 / both_ok as f64
        } else {
            0.0
        },
    };
    Ok(BenchmarkOutcome {
        rows,
        summary,
        errors,
    })
}

pub const BENCHMARK_CSV_HEADER: &str = "instance_id,method,local_mse,r2,abs_error_at_x,wall_ms";

pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{BENCHMARK_CSV_HEADER}").map_err(file_err(path))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.instance_id,
            r.method.as_str(),
            r.local_mse,
            r.r2,
            r.abs_error_at_x,
            r.wall_ms
        )
        .map_err(file_err(path))?;
    }
    out.flush().map_err(file_err(path))
}

// ---------------------------------------------------------------------------
// gen-data

#[derive(Debug)]
pub struct GenDataCmd {
    pub out: PathBuf,
    pub seed: u64,
    pub synth: SynthConfig,
}

pub fn cmd_gen_data(cmd: &GenDataCmd) -> Result<()> {
    let data = generate(&cmd.synth, cmd.seed)?;
    write_csv(&data, &cmd.out)?;
    let meta = meta_block(
        "gen-data",
        cmd.seed,
        json!({ "synth": cmd.synth, "out": cmd.out }),
    );
    write_json(&meta_sidecar_path(&cmd.out), &meta)?;
    println!(
        "wrote {} rows x {} features{} to {}",
        data.n_rows(),
        data.n_features(),
        if data.target().is_some() {
            " (+target)"
        } else {
            ""
        },
        cmd.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-vae

#[derive(Debug)]
pub struct TrainVaeCmd {
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub latent_dim: Option<usize>,
    pub hidden_width: Option<usize>,
    pub kl_weight: Option<f64>,
    pub learning_rate: Option<f64>,
}

fn loss_history_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("loss.csv")
}

fn write_loss_history(path: &Path, history: &[EpochLoss]) -> Result<()> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "epoch,total,recon,kl").map_err(file_err(path))?;
    for (i, e) in history.iter().enumerate() {
        writeln!(out, "{},{},{},{}", i + 1, e.total, e.recon, e.kl).map_err(file_err(path))?;
    }
    out.flush().map_err(file_err(path))
}

pub fn cmd_train_vae(cmd: &TrainVaeCmd) -> Result<()> {
    let data = load_csv(&cmd.data)?;
    let (train, _) = split(
        &data,
        cmd.train_fraction,
        cmd.seed,
        SplitMode::Chronological,
    )?;
    let defaults = VaeTrainConfig::for_input_dim(train.n_features());
    let config = VaeTrainConfig {
        hidden_width: cmd.hidden_width.unwrap_or(defaults.hidden_width),
        latent_dim: cmd.latent_dim.unwrap_or(defaults.latent_dim),
        epochs: cmd.epochs.unwrap_or(defaults.epochs),
        batch_size: cmd.batch_size.unwrap_or(defaults.batch_size),
        kl_weight: cmd.kl_weight.unwrap_or(defaults.kl_weight),
        learning_rate: cmd.learning_rate.unwrap_or(defaults.learning_rate),
        seed: cmd.seed,
    };
    let VaeTraining { model, history } = train_vae(&train, &config)?;
    let meta = meta_block(
        "train-vae",
        cmd.seed,
        json!({
            "data": cmd.data,
            "out": cmd.out,
            "train_fraction": cmd.train_fraction,
            "hidden_width": config.hidden_width,
            "latent_dim": config.latent_dim,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "kl_weight": config.kl_weight,
            "learning_rate": config.learning_rate,
        }),
    );
    write_model(&cmd.out, &vae_to_file(&model, meta.clone()))?;
    let loss_path = loss_history_path(&cmd.out);
    write_loss_history(&loss_path, &history)?;
    write_json(&meta_sidecar_path(&loss_path), &meta)?;
    let last = history.last().expect("training ran at least one epoch");
    println!(
        "trained vae on {} rows (latent_dim {}): final loss {:.6} (recon {:.6}, kl {:.6}); model {}, history {}",
        train.n_rows(),
        config.latent_dim,
        last.total,
        last.recon,
        last.kl,
        cmd.out.display(),
        loss_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-blackbox

#[derive(Debug)]
pub struct TrainBlackboxCmd {
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub hidden: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct BlackboxMetrics {
    holdout_mse: Option<f64>,
    holdout_target_variance: f64,
    n_fit: usize,
    n_holdout: usize,
    meta: Value,
}

pub fn cmd_train_blackbox(cmd: &TrainBlackboxCmd) -> Result<()> {
    let data = load_csv(&cmd.data)?;
    let defaults = MlpTrainConfig::default();
    let config = MlpTrainConfig {
        hidden: cmd.hidden.unwrap_or(defaults.hidden),
        epochs: cmd.epochs.unwrap_or(defaults.epochs),
        batch_size: cmd.batch_size.unwrap_or(defaults.batch_size),
        learning_rate: cmd.learning_rate.unwrap_or(defaults.learning_rate),
        train_fraction: cmd.train_fraction,
        seed: cmd.seed,
    };
    let blackbox = train_mlp_regressor(&data, &config)?;
    let holdout_mse = match &blackbox {
        BlackBox::Mlp(mlp) => mlp.holdout_mse,
        BlackBox::Analytic(_) => None,
    };
    // Same chronological cut as the trainer: fit on ⌈fT⌉, hold out the rest.
    let t = data.n_rows();
    let n_fit = ((config.train_fraction * t as f64).ceil() as usize).clamp(1, t - 1);
    let holdout = data.target().expect("trainer already required a target");
    let holdout = &holdout[n_fit..];
    let hm = holdout.iter().sum::<f64>() / holdout.len() as f64;
    let variance = holdout.iter().map(|y| (y - hm) * (y - hm)).sum::<f64>() / holdout.len() as f64;

    let meta = meta_block(
        "train-blackbox",
        cmd.seed,
        json!({
            "data": cmd.data,
            "out": cmd.out,
            "train_fraction": config.train_fraction,
            "hidden": [config.hidden.0, config.hidden.1],
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
        }),
    );
    write_model(&cmd.out, &blackbox_to_file(&blackbox, meta.clone()))?;
    let metrics_path = cmd.out.with_extension("metrics.json");
    write_json(
        &metrics_path,
        &BlackboxMetrics {
            holdout_mse,
            holdout_target_variance: variance,
            n_fit,
            n_holdout: t - n_fit,
            meta,
        },
    )?;
    println!(
        "trained mlp black box on {n_fit} rows: holdout mse {} over {} rows (target variance {}); model {}, metrics {}",
        holdout_mse.map_or("n/a".to_string(), |m| format!("{m:.6}")),
        t - n_fit,
        variance,
        cmd.out.display(),
        metrics_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// explain

#[derive(Debug)]
pub struct ExplainCmd {
    pub data: PathBuf,
    pub blackbox: PathBuf,
    pub vae: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub method: Method,
    pub row: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub n_samples: usize,
    pub sigma_scale: f64,
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    pub top_k: usize,
}

/// The explanation report written by `explain`: the full surrogate, the
/// ranked view, fidelity, and the (weight, output) scatter pairs.
#[derive(Serialize)]
struct ExplanationFile {
    method: Method,
    instance_id: usize,
    intercept: f64,
    coefficients: Vec<f64>,
    standardized_coefficients: Vec<f64>,
    fit_lambda: f64,
    feature_names: Vec<String>,
    top_k: Vec<crate::surrogate::RankedFeature>,
    weights_summary: WeightsSummary,
    fidelity: crate::surrogate::FidelityReport,
    scatter: Vec<(f64, f64)>,
    meta: Value,
}

pub fn cmd_explain(cmd: &ExplainCmd) -> Result<()> {
    let data = load_csv(&cmd.data)?;
    if cmd.row >= data.n_rows() {
        return Err(Error::InvalidConfig(format!(
            "row {} is out of range for {} rows",
            cmd.row,
            data.n_rows()
        )));
    }
    let blackbox = blackbox_from_file(&read_model(&cmd.blackbox)?)?;
    let vae = match &cmd.vae {
        Some(path) => Some(vae_from_file(&read_model(path)?)?),
        None => None,
    };
    let (train, _) = split(
        &data,
        cmd.train_fraction,
        cmd.seed,
        SplitMode::Chronological,
    )?;
    let stds = Standardization::from_stats(train.stats()).stds;
    let ctx = ExplainContext {
        vae: vae.as_ref(),
        blackbox: &blackbox,
        feature_names: data.feature_names(),
        train_stds: &stds,
    };
    let settings = ExplainSettings {
        n_samples: cmd.n_samples,
        sigma_scale: cmd.sigma_scale,
        kernel_width: cmd.kernel_width,
        ridge_lambda: cmd.ridge_lambda,
        top_k: cmd.top_k,
        seed: cmd.seed,
    };
    let output = explain_one(&ctx, cmd.method, cmd.row, data.row(cmd.row), &settings)?;

    let d = blackbox.input_dim();
    let resolved_kernel = settings
        .kernel_width
        .unwrap_or_else(|| ExplainConfig::default_kernel_width(d));
    let meta = meta_block(
        "explain",
        cmd.seed,
        json!({
            "data": cmd.data,
            "blackbox": cmd.blackbox,
            "vae": cmd.vae,
            "method": cmd.method,
            "row": cmd.row,
            "train_fraction": cmd.train_fraction,
            "n": cmd.n_samples,
            "sigma_scale": cmd.sigma_scale,
            "kernel_width": resolved_kernel,
            "ridge_lambda": cmd.ridge_lambda,
            "top_k": cmd.top_k,
        }),
    );
    let scatter: Vec<(f64, f64)> = output
        .weights
        .iter()
        .copied()
        .zip(output.outputs.iter().copied())
        .collect();
    let file = ExplanationFile {
        method: cmd.method,
        instance_id: cmd.row,
        intercept: output.explanation.surrogate.intercept,
        coefficients: output.explanation.surrogate.coefficients.clone(),
        standardized_coefficients: output.standardized_coefficients.clone(),
        fit_lambda: output.explanation.surrogate.fit_lambda,
        feature_names: data.feature_names().to_vec(),
        top_k: output.explanation.top_k.clone(),
        weights_summary: output.explanation.weights_summary,
        fidelity: output.explanation.fidelity,
        scatter,
        meta,
    };
    match &cmd.out {
        Some(path) => {
            write_json(path, &file)?;
            println!(
                "explained row {} with {}: local_mse {}, r2 {}, abs_error_at_x {}; report {}",
                cmd.row,
                cmd.method,
                file.fidelity.local_mse,
                file.fidelity.r2,
                file.fidelity.abs_error_at_x,
                path.display()
            );
        }
        None => {
            let body = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
            println!("{body}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark

#[derive(Debug)]
pub struct BenchmarkCmd {
    pub data: PathBuf,
    pub blackbox: PathBuf,
    pub vae: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub plan: BenchmarkPlan,
}

#[derive(Serialize)]
struct SummaryFile {
    #[serde(flatten)]
    summary: BenchmarkSummary,
    meta: Value,
}

/// Runs the paired benchmark and writes the CSV, its meta sidecar, and a
/// `<out>.summary.json`. Returns the process exit code: 0 clean, 3 when
/// any instance failed (artifacts are still flushed).
pub fn cmd_benchmark(cmd: &BenchmarkCmd) -> Result<i32> {
    let data = load_csv(&cmd.data)?;
    let blackbox = blackbox_from_file(&read_model(&cmd.blackbox)?)?;
    let vae = vae_from_file(&read_model(&cmd.vae)?)?;
    let outcome = run_benchmark(&data, &vae, &blackbox, &cmd.plan)?;

    let d = blackbox.input_dim();
    let resolved_kernel = cmd
        .plan
        .kernel_width
        .unwrap_or_else(|| ExplainConfig::default_kernel_width(d));
    let meta = meta_block(
        "benchmark",
        cmd.seed,
        json!({
            "data": cmd.data,
            "blackbox": cmd.blackbox,
            "vae": cmd.vae,
            "out": cmd.out,
            "instances": cmd.plan.instances,
            "select": cmd.plan.select.as_str(),
            "train_fraction": cmd.plan.train_fraction,
            "n": cmd.plan.n_samples,
            "sigma_scale": cmd.plan.sigma_scale,
            "kernel_width": resolved_kernel,
            "ridge_lambda": cmd.plan.ridge_lambda,
            "top_k": cmd.plan.top_k,
            "no_timing": !cmd.plan.measure_time,
        }),
    );
    write_benchmark_csv(&cmd.out, &outcome.rows)?;
    write_json(&meta_sidecar_path(&cmd.out), &meta)?;
    let summary_path = cmd.out.with_extension("summary.json");
    write_json(
        &summary_path,
        &SummaryFile {
            summary: outcome.summary.clone(),
            meta,
        },
    )?;

    for line in &outcome.errors {
        eprintln!("error: {line}");
    }
    let s = &outcome.summary;
    println!(
        "benchmarked {} instances: local_mse vae-lime {} vs lime {}; r2 {} vs {}; abs_error_at_x {} vs {}; win fraction {}",
        s.instances,
        s.vae_lime.mean_local_mse,
        s.lime.mean_local_mse,
        s.vae_lime.mean_r2,
        s.lime.mean_r2,
        s.vae_lime.mean_abs_error_at_x,
        s.lime.mean_abs_error_at_x,
        s.vae_lime_mse_win_fraction
    );
    println!(
        "rows {}, summary {}",
        cmd.out.display(),
        summary_path.display()
    );
    if outcome.summary.failures > 0 {
        eprintln!(
            "error: {} of {} explanations failed; metrics for those rows are NaN",
            outcome.summary.failures,
            2 * outcome.summary.instances
        );
        return Ok(3);
    }
    Ok(0)
}
