//! Synthetic correlated process data, CSV ingestion, feature statistics,
//! and train/test splitting.
//!
//! The generator draws rank-k AR(1) latent factors and mixes them into d
//! observed features. That low-rank, autocorrelated structure is exactly
//! what a VAE can exploit and what independent per-feature perturbation
//! ignores, which makes the generated sets a fair proxy for highly
//! inter-correlated process measurements.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as IoWrite};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blackbox::AnalyticSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-feature summary statistics. `std` uses the T−1 denominator and is 0
/// for single-row datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// An immutable table of named numeric features with an optional target
/// column and precomputed per-feature statistics.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Matrix,
    target: Option<Vec<f64>>,
    stats: Vec<FeatureStats>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Matrix, target: Option<Vec<f64>>) -> Result<Self> {
        if rows.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if feature_names.len() != rows.cols() {
            return Err(Error::DimensionMismatch {
                context: "dataset feature names",
                expected: rows.cols(),
                actual: feature_names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !valid_name(name) {
                return Err(Error::InvalidConfig(format!(
                    "feature name `{name}` contains characters outside [A-Za-z0-9_]"
                )));
            }
            if name == "target" {
                return Err(Error::InvalidConfig(
                    "`target` is reserved for the target column".into(),
                ));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateHeader { name: name.clone() });
            }
        }
        if !rows.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        if let Some(y) = &target {
            if y.len() != rows.rows() {
                return Err(Error::DimensionMismatch {
                    context: "dataset target length",
                    expected: rows.rows(),
                    actual: y.len(),
                });
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        let stats = compute_stats(&rows);
        Ok(Dataset {
            feature_names,
            rows,
            target,
            stats,
        })
    }

    /// Same features with a replacement target column.
    pub fn with_target(self, target: Vec<f64>) -> Result<Self> {
        Dataset::new(self.feature_names, self.rows, Some(target))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.rows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn stats(&self) -> &[FeatureStats] {
        &self.stats
    }
}

fn compute_stats(rows: &Matrix) -> Vec<FeatureStats> {
    let t = rows.rows();
    (0..rows.cols())
        .map(|j| {
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for i in 0..t {
                let v = rows[(i, j)];
                sum += v;
                min = min.min(v);
                max = max.max(v);
            }
            let mean = sum / t as f64;
            let std = if t > 1 {
                let ss: f64 = (0..t).map(|i| (rows[(i, j)] - mean).powi(2)).sum();
                (ss / (t - 1) as f64).sqrt()
            } else {
                0.0
            };
            FeatureStats {
                mean,
                std,
                min,
                max,
            }
        })
        .collect()
}

/// Per-feature affine transform to zero mean and unit variance. Features
/// with (near-)zero spread keep std 1 so the transform stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn from_stats(stats: &[FeatureStats]) -> Self {
        Standardization {
            means: stats.iter().map(|s| s.mean).collect(),
            stds: stats
                .iter()
                .map(|s| if s.std < 1e-12 { 1.0 } else { s.std })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.means.len(), "standardization length mismatch");
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.means.len(), "standardization length mismatch");
        z.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// How latent factors map to observed features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    /// Seeded random d×k matrix with unit-norm rows; the seed pins the
    /// "process" independently of the data seed.
    Seeded { seed: u64 },
    /// Identity block: feature j equals factor j for j < k, zero otherwise.
    /// Meant for tests that need to observe the factors directly.
    Identity,
}

/// Target column recipe: a ground-truth analytic function of the features
/// plus Gaussian observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub analytic: AnalyticSpec,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_features: usize,
    pub latent_rank: usize,
    /// AR(1) coefficient ρ ∈ [0, 1) of the latent factors.
    pub ar_coefficient: f64,
    /// Std of the per-feature observation noise added after mixing.
    pub noise_std: f64,
    pub mixing: Mixing,
    pub target: Option<TargetSpec>,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_rows < 10 {
            return Err(Error::InvalidConfig(format!(
                "generator needs at least 10 rows, got {}",
                self.n_rows
            )));
        }
        if self.latent_rank == 0 || self.latent_rank > self.n_features {
            return Err(Error::InvalidConfig(format!(
                "latent_rank must be in 1..={}, got {}",
                self.n_features, self.latent_rank
            )));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(Error::InvalidConfig(format!(
                "ar_coefficient must be in [0, 1), got {}",
                self.ar_coefficient
            )));
        }
        if self.noise_std < 0.0 || self.noise_std.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "noise_std must be nonnegative, got {}",
                self.noise_std
            )));
        }
        if let Some(spec) = &self.target {
            if spec.analytic.input_dim() != self.n_features {
                return Err(Error::InvalidConfig(format!(
                    "target formula expects {} features, generator produces {}",
                    spec.analytic.input_dim(),
                    self.n_features
                )));
            }
            if spec.noise_std < 0.0 || spec.noise_std.is_nan() {
                return Err(Error::InvalidConfig(format!(
                    "target noise_std must be nonnegative, got {}",
                    spec.noise_std
                )));
            }
        }
        Ok(())
    }
}

fn mixing_matrix(mixing: Mixing, d: usize, k: usize) -> Matrix {
    match mixing {
        Mixing::Identity => Matrix::from_fn(d, k, |r, c| if r == c { 1.0 } else { 0.0 }),
        Mixing::Seeded { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = Matrix::from_fn(d, k, |_, _| rng.sample(StandardNormal));
            for r in 0..d {
                let norm: f64 = (0..k).map(|c| a[(r, c)] * a[(r, c)]).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for c in 0..k {
                        a[(r, c)] /= norm;
                    }
                }
            }
            a
        }
    }
}

/// Generates T rows of xₜ = A·uₜ + noise, where uₜ is a stationary
/// unit-variance AR(1) factor process: uₜ = ρ·uₜ₋₁ + √(1−ρ²)·ξₜ.
pub fn generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let (t, d, k) = (config.n_rows, config.n_features, config.latent_rank);
    let rho = config.ar_coefficient;
    let innovation = (1.0 - rho * rho).sqrt();
    let a = mixing_matrix(config.mixing, d, k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = Matrix::zeros(t, d);
    let mut target = config.target.as_ref().map(|_| Vec::with_capacity(t));
    for i in 0..t {
        if i > 0 {
            for u in factors.iter_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *u = rho * *u + innovation * xi;
            }
        }
        let x = a.matvec(&factors);
        for (j, v) in x.iter().enumerate() {
            let eta: f64 = if config.noise_std > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            rows[(i, j)] = v + config.noise_std * eta;
        }
        if let Some(spec) = &config.target {
            let eps: f64 = if spec.noise_std > 0.0 {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            let y = spec.analytic.evaluate(rows.row(i)) + spec.noise_std * eps;
            target.as_mut().unwrap().push(y);
        }
    }

    let names = (1..=d).map(|j| format!("f{j}")).collect();
    Dataset::new(names, rows, target)
}

/// Writes the dataset as CSV: header row, LF line endings, shortest
/// round-trip decimal rendering of each value.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| Error::File {
        path: path.to_path_buf(),
        source,
    };

    let mut header = dataset.feature_names().join(",");
    if dataset.target().is_some() {
        header.push_str(",target");
    }
    header.push('\n');
    out.write_all(header.as_bytes()).map_err(io_err)?;

    let mut line = String::new();
    for i in 0..dataset.n_rows() {
        line.clear();
        for (j, v) in dataset.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v}"));
        }
        if let Some(target) = dataset.target() {
            line.push(',');
            line.push_str(&format!("{}", target[i]));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Loads a CSV with a header row. A column named `target` becomes the
/// target; every other column is a feature, order preserved. Parse errors
/// carry the 1-based file line and column.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| csv_error_to_parse(path, &e))?
        .clone();
    let mut seen = HashSet::new();
    for name in headers.iter() {
        if !seen.insert(name.to_string()) {
            return Err(Error::DuplicateHeader { name: name.into() });
        }
    }
    let target_col = headers.iter().position(|h| h == "target");
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != target_col)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error_to_parse(path, &e))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 2);
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: c + 1,
                message: format!("`{cell}`: {e}"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    path: path.to_path_buf(),
                    row: line,
                    col: c + 1,
                });
            }
            if Some(c) == target_col {
                target.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = Matrix::from_rows(&rows);
    Dataset::new(feature_names, matrix, target_col.map(|_| target))
}

fn csv_error_to_parse(path: &Path, e: &csv::Error) -> Error {
    let (row, col) = match e.position() {
        Some(p) => (p.line() as usize, 1),
        None => (0, 0),
    };
    Error::Parse {
        path: path.to_path_buf(),
        row,
        col,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// First ⌈fT⌉ rows train, the rest test; respects time order.
    Chronological,
    /// Seeded permutation before the same cut.
    Shuffled,
}

/// Splits into (train, test) of sizes ⌈fT⌉ and the rest. Errors if either
/// side would be empty.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Dataset, Dataset)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let t = dataset.n_rows();
    let n_train = (train_fraction * t as f64).ceil() as usize;
    if n_train == 0 || n_train >= t {
        return Err(Error::InvalidConfig(format!(
            "train_fraction {train_fraction} on {t} rows leaves an empty split"
        )));
    }
    let mut indices: Vec<usize> = (0..t).collect();
    if mode == SplitMode::Shuffled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
    }
    let subset = |idx: &[usize]| -> Result<Dataset> {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| dataset.row(i).to_vec()).collect();
        let target = dataset
            .target()
            .map(|y| idx.iter().map(|&i| y[i]).collect());
        Dataset::new(
            dataset.feature_names().to_vec(),
            Matrix::from_rows(&rows),
            target,
        )
    };
    Ok((subset(&indices[..n_train])?, subset(&indices[n_train..])?))
}
