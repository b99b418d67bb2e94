//! The variational autoencoder: inputs are encoded as normal distributions
//! over the latent space, not as single points.
//!
//! The encoder maps a standardized feature vector to (μ, log σ²); sampling
//! goes through the reparameterization z = μ + exp(0.5·log σ²) ⊙ ε so the
//! whole loss stays differentiable. Training minimizes reconstruction MSE
//! plus a KL term that penalizes encodings far from the standard normal
//! prior.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::nnet::{self, Activation, AdamHyper, DenseNet, Gradients, OptimizerState};

/// Clamp bounds for log σ², preventing overflow in exp.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

/// Floor for the stored per-dimension sampling spread.
const LATENT_SIGMA_FLOOR: f64 = 1e-6;

/// A trained autoencoder pair plus the transforms and defaults frozen at
/// training time. `latent_sigma` is the default per-dimension spread used
/// when sampling around an encoded instance: half the standard deviation of
/// the training latent means.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub encoder: DenseNet,
    pub decoder: DenseNet,
    pub latent_dim: usize,
    pub input_dim: usize,
    pub standardization: Standardization,
    pub latent_sigma: Vec<f64>,
}

impl VaeModel {
    pub fn new(
        encoder: DenseNet,
        decoder: DenseNet,
        standardization: Standardization,
        latent_sigma: Vec<f64>,
    ) -> Result<Self> {
        let input_dim = encoder.input_dim();
        if !encoder.output_dim().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "encoder output dim {} is not 2·latent_dim",
                encoder.output_dim()
            )));
        }
        let latent_dim = encoder.output_dim() / 2;
        if decoder.input_dim() != latent_dim {
            return Err(Error::DimensionMismatch {
                context: "decoder input dim",
                expected: latent_dim,
                actual: decoder.input_dim(),
            });
        }
        if decoder.output_dim() != input_dim {
            return Err(Error::DimensionMismatch {
                context: "decoder output dim",
                expected: input_dim,
                actual: decoder.output_dim(),
            });
        }
        if standardization.len() != input_dim {
            return Err(Error::DimensionMismatch {
                context: "vae standardization",
                expected: input_dim,
                actual: standardization.len(),
            });
        }
        if latent_sigma.len() != latent_dim {
            return Err(Error::DimensionMismatch {
                context: "vae latent sigma",
                expected: latent_dim,
                actual: latent_sigma.len(),
            });
        }
        if !latent_sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidConfig(
                "latent sigma entries must be positive and finite".into(),
            ));
        }
        Ok(VaeModel {
            encoder,
            decoder,
            latent_dim,
            input_dim,
            standardization,
            latent_sigma,
        })
    }

    /// Encodes an original-units instance to (μ, log σ²). Deterministic;
    /// log σ² is clamped to [−10, 10].
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "vae encode input",
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let standardized = self.standardization.apply(x);
        let pass = self.encoder.forward(&standardized)?;
        let out = pass.output();
        let mu = out[..self.latent_dim].to_vec();
        let logvar = out[self.latent_dim..]
            .iter()
            .map(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX))
            .collect();
        Ok((mu, logvar))
    }

    /// Decodes a latent point back to original feature units.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return Err(Error::DimensionMismatch {
                context: "vae decode input",
                expected: self.latent_dim,
                actual: z.len(),
            });
        }
        let pass = self.decoder.forward(z)?;
        Ok(self.standardization.invert(pass.output()))
    }
}

/// z = μ + exp(0.5·log σ²) ⊙ ε.
pub fn reparameterize(mu: &[f64], logvar: &[f64], epsilon: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() || mu.len() != epsilon.len() {
        return Err(Error::DimensionMismatch {
            context: "reparameterize lengths",
            expected: mu.len(),
            actual: logvar.len().max(epsilon.len()),
        });
    }
    Ok(mu
        .iter()
        .zip(logvar.iter().zip(epsilon))
        .map(|(m, (lv, e))| m + (0.5 * lv).exp() * e)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// recon = (1/d)·Σⱼ(xⱼ−x̂ⱼ)²; kl = 0.5·Σⱼ(μⱼ² + exp(lvⱼ) − lvⱼ − 1);
/// total = recon + kl_weight·kl. The KL sum is nonnegative analytically and
/// clamped at zero to absorb roundoff.
pub fn vae_loss(x: &[f64], x_hat: &[f64], mu: &[f64], logvar: &[f64], kl_weight: f64) -> VaeLoss {
    assert_eq!(x.len(), x_hat.len(), "reconstruction length mismatch");
    assert_eq!(mu.len(), logvar.len(), "latent length mismatch");
    let d = x.len() as f64;
    let recon = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / d;
    let kl = 0.5
        * mu.iter()
            .zip(logvar)
            .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
            .sum::<f64>();
    let kl = kl.max(0.0);
    VaeLoss {
        total: recon + kl_weight * kl,
        recon,
        kl,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeTrainConfig {
    pub hidden_width: usize,
    pub latent_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl VaeTrainConfig {
    /// Defaults for a d-dimensional input: one 16-unit tanh hidden layer on
    /// each side and L = max(2, ⌈d/4⌉).
    pub fn for_input_dim(d: usize) -> Self {
        VaeTrainConfig {
            hidden_width: 16,
            latent_dim: 2.max(d.div_ceil(4)),
            epochs: 200,
            batch_size: 64,
            kl_weight: 0.1,
            learning_rate: 1e-3,
            seed: 0,
        }
    }

    fn validate(&self, n_rows: usize) -> Result<()> {
        if self.hidden_width == 0
            || self.latent_dim == 0
            || self.epochs == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidConfig(
                "vae counts (hidden_width, latent_dim, epochs, batch_size) must be >= 1".into(),
            ));
        }
        if self.kl_weight < 0.0 || self.kl_weight.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "kl_weight must be nonnegative, got {}",
                self.kl_weight
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if n_rows < 2 * self.batch_size {
            return Err(Error::InvalidConfig(format!(
                "vae training needs at least 2·batch_size = {} rows, got {n_rows}",
                2 * self.batch_size
            )));
        }
        Ok(())
    }
}

/// Per-epoch mean losses, in standardized feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// A trained model together with its loss history.
#[derive(Debug, Clone)]
pub struct VaeTraining {
    pub model: VaeModel,
    pub history: Vec<EpochLoss>,
}

/// One sample's loss and parameter gradients with the reparameterization
/// noise held fixed. The clamp on log σ² zeroes its gradient outside the
/// bounds.
fn sample_gradients(
    encoder: &DenseNet,
    decoder: &DenseNet,
    x_std: &[f64],
    epsilon: &[f64],
    kl_weight: f64,
) -> Result<(VaeLoss, Gradients, Gradients)> {
    let latent_dim = epsilon.len();
    let d = x_std.len() as f64;

    let enc_pass = encoder.forward(x_std)?;
    let enc_out = enc_pass.output();
    let mu = &enc_out[..latent_dim];
    let raw_logvar = &enc_out[latent_dim..];
    let logvar: Vec<f64> = raw_logvar
        .iter()
        .map(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX))
        .collect();

    let z = reparameterize(mu, &logvar, epsilon)?;
    let dec_pass = decoder.forward(&z)?;
    let x_hat = dec_pass.output();
    let loss = vae_loss(x_std, x_hat, mu, &logvar, kl_weight);

    let d_xhat: Vec<f64> = x_hat
        .iter()
        .zip(x_std)
        .map(|(xh, x)| 2.0 * (xh - x) / d)
        .collect();
    let dec_grads = decoder.backward(&dec_pass, &d_xhat)?;
    let dz = &dec_grads.input;

    let mut enc_out_grad = vec![0.0; 2 * latent_dim];
    for j in 0..latent_dim {
        // z = μ + exp(0.5·lv)·ε: ∂z/∂μ = 1, ∂z/∂lv = 0.5·exp(0.5·lv)·ε.
        enc_out_grad[j] = dz[j] + kl_weight * mu[j];
        let saturated = raw_logvar[j] <= LOGVAR_MIN || raw_logvar[j] >= LOGVAR_MAX;
        if !saturated {
            enc_out_grad[latent_dim + j] = dz[j] * epsilon[j] * 0.5 * (0.5 * logvar[j]).exp()
                + kl_weight * 0.5 * (logvar[j].exp() - 1.0);
        }
    }
    let enc_grads = encoder.backward(&enc_pass, &enc_out_grad)?;
    Ok((loss, enc_grads, dec_grads))
}

/// Mini-batch training on standardized features. Standardization stats are
/// frozen from the given data; one ε draw per sample per epoch.
pub fn train_vae(data: &Dataset, config: &VaeTrainConfig) -> Result<VaeTraining> {
    config.validate(data.n_rows())?;
    let d = data.n_features();
    let latent = config.latent_dim;

    let standardization = Standardization::from_stats(data.stats());
    let rows: Vec<Vec<f64>> = (0..data.n_rows())
        .map(|i| standardization.apply(data.row(i)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut encoder = DenseNet::init(
        &[d, config.hidden_width, 2 * latent],
        &[Activation::Tanh, Activation::Identity],
        &mut rng,
    );
    let mut decoder = DenseNet::init(
        &[latent, config.hidden_width, d],
        &[Activation::Tanh, Activation::Identity],
        &mut rng,
    );
    let hyper = AdamHyper {
        learning_rate: config.learning_rate,
        ..AdamHyper::default()
    };
    let mut enc_state = OptimizerState::new(&encoder, hyper);
    let mut dec_state = OptimizerState::new(&decoder, hyper);

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut epsilon = vec![0.0; latent];
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = EpochLoss {
            total: 0.0,
            recon: 0.0,
            kl: 0.0,
        };
        for batch in order.chunks(config.batch_size) {
            let mut enc_batch = Gradients::zeros_like(&encoder);
            let mut dec_batch = Gradients::zeros_like(&decoder);
            for &i in batch {
                for e in epsilon.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                let (loss, enc_g, dec_g) =
                    sample_gradients(&encoder, &decoder, &rows[i], &epsilon, config.kl_weight)?;
                if !loss.total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        loss: loss.total,
                    });
                }
                epoch_sum.total += loss.total;
                epoch_sum.recon += loss.recon;
                epoch_sum.kl += loss.kl;
                enc_batch.accumulate(&enc_g);
                dec_batch.accumulate(&dec_g);
            }
            let scale = 1.0 / batch.len() as f64;
            enc_batch.scale(scale);
            dec_batch.scale(scale);
            nnet::optimizer_step(&mut encoder, &enc_batch, &mut enc_state);
            nnet::optimizer_step(&mut decoder, &dec_batch, &mut dec_state);
        }
        let n = rows.len() as f64;
        history.push(EpochLoss {
            total: epoch_sum.total / n,
            recon: epoch_sum.recon / n,
            kl: epoch_sum.kl / n,
        });
    }

    // Default sampling spread: half the spread of the training latent means.
    let mut latent_means = vec![Vec::with_capacity(rows.len()); latent];
    for row in &rows {
        let pass = encoder.forward(row)?;
        for (j, m) in pass.output()[..latent].iter().enumerate() {
            latent_means[j].push(*m);
        }
    }
    let latent_sigma: Vec<f64> = latent_means
        .iter()
        .map(|ms| {
            let mean = ms.iter().sum::<f64>() / ms.len() as f64;
            let var =
                ms.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (ms.len() - 1) as f64;
            (0.5 * var.sqrt()).max(LATENT_SIGMA_FLOOR)
        })
        .collect();

    let model = VaeModel::new(encoder, decoder, standardization, latent_sigma)?;
    Ok(VaeTraining { model, history })
}
