//! Perturbation generation and weighting for both explanation methods.
//!
//! VAE-LIME samples the latent neighborhood of the encoded test instance
//! and weights each sample by the complement of the Gower distance to the
//! anchor. The classic LIME baseline perturbs every feature independently
//! in input space and weights with an exponential kernel; it deliberately
//! ignores any correlation between the variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::blackbox::BlackBox;
use crate::error::{Error, Result};
use crate::vae::VaeModel;

/// A dimension whose value range across the batch falls below this bound
/// contributes zero Gower distance.
const GOWER_RANGE_FLOOR: f64 = 1e-12;

/// Shared knobs for one explanation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    /// Number of perturbation samples N.
    pub n_samples: usize,
    /// Per-dimension latent spread σⱼ (VAE-LIME).
    pub sigma: Vec<f64>,
    /// Exponential kernel width κ (LIME).
    pub kernel_width: f64,
    /// Ridge strength for the surrogate fit.
    pub ridge_lambda: f64,
    pub seed: u64,
}

impl ExplainConfig {
    /// The classic tabular-LIME kernel width default, 0.75·√d.
    pub fn default_kernel_width(input_dim: usize) -> f64 {
        0.75 * (input_dim as f64).sqrt()
    }

    /// Checks the config against the input dimension d (surrogate needs
    /// N ≥ d+2 to be solvable with an intercept).
    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.n_samples < input_dim + 2 {
            return Err(Error::InvalidConfig(format!(
                "n_samples must be at least d+2 = {}, got {}",
                input_dim + 2,
                self.n_samples
            )));
        }
        if self.sigma.is_empty() || !self.sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidConfig(
                "sigma entries must be positive and finite".into(),
            ));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel_width must be positive, got {}",
                self.kernel_width
            )));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ridge_lambda must be nonnegative, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// The weighted neighborhood a surrogate is fitted on. For VAE-LIME the
/// latent points and anchor z* are kept for inspection; for LIME they are
/// absent.
#[derive(Debug, Clone)]
pub struct WeightedSampleSet {
    pub samples: Vec<Vec<f64>>,
    pub latent_points: Option<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub anchor_x: Vec<f64>,
    pub anchor_z: Option<Vec<f64>>,
}

/// zᵢ = z* + σ ⊙ εᵢ with εᵢ i.i.d. standard normal.
pub fn sample_latent(z_star: &[f64], sigma: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert_eq!(z_star.len(), sigma.len(), "sigma length mismatch");
    assert!(n >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            z_star
                .iter()
                .zip(sigma)
                .map(|(z, s)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    z + s * eps
                })
                .collect()
        })
        .collect()
}

/// wᵢ = 1 − Gower(zᵢ, z*), with per-dimension ranges taken over the batch
/// plus the anchor so every weight lands in [0, 1]. Near-zero ranges
/// contribute zero distance.
pub fn gower_weights(latent_points: &[Vec<f64>], z_star: &[f64]) -> Vec<f64> {
    assert!(!latent_points.is_empty(), "need at least one latent point");
    let l = z_star.len();
    let mut min = z_star.to_vec();
    let mut max = z_star.to_vec();
    for point in latent_points {
        assert_eq!(point.len(), l, "latent point length mismatch");
        for j in 0..l {
            min[j] = min[j].min(point[j]);
            max[j] = max[j].max(point[j]);
        }
    }
    let range: Vec<f64> = (0..l).map(|j| max[j] - min[j]).collect();
    latent_points
        .iter()
        .map(|point| {
            let mut distance = 0.0;
            for j in 0..l {
                if range[j] >= GOWER_RANGE_FLOOR {
                    distance += (point[j] - z_star[j]).abs() / range[j];
                }
            }
            // Roundoff can push the average a hair past the bounds.
            (1.0 - distance / l as f64).clamp(0.0, 1.0)
        })
        .collect()
}

/// x'ᵢⱼ = x_test,ⱼ + sⱼ·εᵢⱼ, every feature perturbed independently.
pub fn lime_sample(x_test: &[f64], feature_stds: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    assert_eq!(x_test.len(), feature_stds.len(), "stds length mismatch");
    assert!(
        feature_stds.iter().all(|s| *s > 0.0),
        "feature stds must be positive"
    );
    assert!(n >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            x_test
                .iter()
                .zip(feature_stds)
                .map(|(x, s)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    x + s * eps
                })
                .collect()
        })
        .collect()
}

/// wᵢ = exp(−D²/κ²) with D the Euclidean distance in per-feature
/// standardized coordinates ((x'ⱼ − x_test,ⱼ)/sⱼ).
pub fn kernel_weights(
    samples: &[Vec<f64>],
    x_test: &[f64],
    feature_stds: &[f64],
    kappa: f64,
) -> Vec<f64> {
    assert!(kappa > 0.0, "kernel width must be positive");
    assert_eq!(x_test.len(), feature_stds.len(), "stds length mismatch");
    samples
        .iter()
        .map(|sample| {
            assert_eq!(sample.len(), x_test.len(), "sample length mismatch");
            let d2: f64 = sample
                .iter()
                .zip(x_test.iter().zip(feature_stds))
                .map(|(s, (x, sd))| {
                    let u = (s - x) / sd;
                    u * u
                })
                .sum();
            (-d2 / (kappa * kappa)).exp()
        })
        .collect()
}

/// The VAE-LIME neighborhood: encode x_test, sample latent points around
/// the mean, weight by Gower complement, decode, and query the black box.
/// A failing prediction is reported with its sample index.
pub fn build_vae_lime_set(
    model: &VaeModel,
    blackbox: &BlackBox,
    x_test: &[f64],
    config: &ExplainConfig,
) -> Result<(WeightedSampleSet, Vec<f64>)> {
    config.validate(model.input_dim)?;
    if config.sigma.len() != model.latent_dim {
        return Err(Error::DimensionMismatch {
            context: "explain sigma length",
            expected: model.latent_dim,
            actual: config.sigma.len(),
        });
    }
    if blackbox.input_dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            context: "black-box input dim",
            expected: model.input_dim,
            actual: blackbox.input_dim(),
        });
    }
    let (z_star, _) = model.encode(x_test)?;
    let latent_points = sample_latent(&z_star, &config.sigma, config.n_samples, config.seed);
    let weights = gower_weights(&latent_points, &z_star);
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut outputs = Vec::with_capacity(config.n_samples);
    for (index, z) in latent_points.iter().enumerate() {
        let s = model.decode(z)?;
        let y = blackbox.predict(&s).map_err(|e| Error::Prediction {
            index,
            source: Box::new(e),
        })?;
        samples.push(s);
        outputs.push(y);
    }
    Ok((
        WeightedSampleSet {
            samples,
            latent_points: Some(latent_points),
            weights,
            anchor_x: x_test.to_vec(),
            anchor_z: Some(z_star),
        },
        outputs,
    ))
}

/// The classic LIME neighborhood: independent Gaussian perturbations of
/// x_test weighted by the exponential kernel, queried against the black
/// box.
pub fn build_lime_set(
    blackbox: &BlackBox,
    x_test: &[f64],
    feature_stds: &[f64],
    config: &ExplainConfig,
) -> Result<(WeightedSampleSet, Vec<f64>)> {
    config.validate(blackbox.input_dim())?;
    if x_test.len() != blackbox.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "explain instance length",
            expected: blackbox.input_dim(),
            actual: x_test.len(),
        });
    }
    if feature_stds.len() != x_test.len() || !feature_stds.iter().all(|s| *s > 0.0) {
        return Err(Error::InvalidConfig(
            "lime needs one positive training std per feature".into(),
        ));
    }
    let samples = lime_sample(x_test, feature_stds, config.n_samples, config.seed);
    let weights = kernel_weights(&samples, x_test, feature_stds, config.kernel_width);
    let mut outputs = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let y = blackbox.predict(s).map_err(|e| Error::Prediction {
            index,
            source: Box::new(e),
        })?;
        outputs.push(y);
    }
    Ok((
        WeightedSampleSet {
            samples,
            latent_points: None,
            weights,
            anchor_x: x_test.to_vec(),
            anchor_z: None,
        },
        outputs,
    ))
}
