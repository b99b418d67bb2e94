//! The opaque regressors to be explained.
//!
//! Two stand-ins for a real process model share one predict contract: an
//! analytic nonlinear function whose exact gradient doubles as a validation
//! oracle, and an MLP regressor trained through `nnet` on standardized
//! features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{Dataset, Standardization};
use crate::error::{Error, Result};
use crate::nnet::{self, Activation, AdamHyper, DenseNet, Gradients, OptimizerState};

/// Parameters of f(x) = c₁·sin(x₁) + c₂·x₂·x₃ + c₃·x₄² + Σⱼ≥₅ bⱼ·xⱼ.
///
/// The linear tail `b` has one entry per feature beyond the fourth, so the
/// input dimension is `4 + linear.len()` and must be at least 5.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalyticSpec {
    pub c: [f64; 3],
    pub linear: Vec<f64>,
}

impl AnalyticSpec {
    pub fn new(c: [f64; 3], linear: Vec<f64>) -> Result<Self> {
        if linear.is_empty() {
            return Err(Error::InvalidConfig(
                "analytic spec needs at least one linear term (input dim >= 5)".into(),
            ));
        }
        if !c.iter().chain(&linear).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(AnalyticSpec { c, linear })
    }

    pub fn input_dim(&self) -> usize {
        4 + self.linear.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let [c1, c2, c3] = self.c;
        let linear_part: f64 = self.linear.iter().zip(&x[4..]).map(|(b, xj)| b * xj).sum();
        c1 * x[0].sin() + c2 * x[1] * x[2] + c3 * x[3] * x[3] + linear_part
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let [c1, c2, c3] = self.c;
        let mut g = Vec::with_capacity(self.input_dim());
        g.push(c1 * x[0].cos());
        g.push(c2 * x[2]);
        g.push(c2 * x[1]);
        g.push(2.0 * c3 * x[3]);
        g.extend_from_slice(&self.linear);
        g
    }
}

/// A trained MLP regressor together with the transforms frozen at training
/// time. Features are standardized before the net; the target was
/// standardized during training, so predictions are mapped back through
/// (target_mean, target_std).
#[derive(Debug, Clone)]
pub struct MlpRegressor {
    pub net: DenseNet,
    pub features: Standardization,
    pub target_mean: f64,
    pub target_std: f64,
    pub holdout_mse: Option<f64>,
}

/// The uniform black-box contract: a deterministic map from a feature
/// vector to a scalar prediction.
#[derive(Debug, Clone)]
pub enum BlackBox {
    Analytic(AnalyticSpec),
    Mlp(MlpRegressor),
}

impl BlackBox {
    pub fn input_dim(&self) -> usize {
        match self {
            BlackBox::Analytic(spec) => spec.input_dim(),
            BlackBox::Mlp(mlp) => mlp.net.input_dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BlackBox::Analytic(_) => "analytic",
            BlackBox::Mlp(_) => "mlp",
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "black-box predict input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        match self {
            BlackBox::Analytic(spec) => Ok(spec.evaluate(x)),
            BlackBox::Mlp(mlp) => {
                let standardized = mlp.features.apply(x);
                let pass = mlp.net.forward(&standardized)?;
                Ok(pass.output()[0] * mlp.target_std + mlp.target_mean)
            }
        }
    }

    /// Exact gradient of the analytic formula. The MLP is opaque by design,
    /// so asking for its gradient is an error.
    pub fn analytic_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            BlackBox::Analytic(spec) => {
                if x.len() != spec.input_dim() {
                    return Err(Error::DimensionMismatch {
                        context: "analytic gradient input",
                        expected: spec.input_dim(),
                        actual: x.len(),
                    });
                }
                Ok(spec.gradient(x))
            }
            BlackBox::Mlp(_) => Err(Error::WrongKind { actual: "mlp" }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpTrainConfig {
    pub hidden: (usize, usize),
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Chronological fraction used for fitting; the rest is the holdout.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        MlpTrainConfig {
            hidden: (32, 16),
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Trains the default d → 32 tanh → 16 tanh → 1 regressor on standardized
/// features and a standardized target, holding out the chronological tail
/// to record an honest MSE.
pub fn train_mlp_regressor(data: &Dataset, config: &MlpTrainConfig) -> Result<BlackBox> {
    let target = data.target().ok_or_else(|| {
        Error::InvalidConfig("black-box training needs a dataset with a target column".into())
    })?;
    if data.n_rows() < 100 {
        return Err(Error::InvalidConfig(format!(
            "black-box training needs at least 100 rows, got {}",
            data.n_rows()
        )));
    }
    if !(0.0 < config.train_fraction && config.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {}",
            config.train_fraction
        )));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidConfig(
            "epochs and batch_size must be at least 1".into(),
        ));
    }

    let d = data.n_features();
    let n_fit = ((config.train_fraction * data.n_rows() as f64).ceil() as usize)
        .clamp(1, data.n_rows() - 1);
    let features = Standardization::from_stats(data.stats());
    let fit_targets = &target[..n_fit];
    let target_mean = fit_targets.iter().sum::<f64>() / n_fit as f64;
    let target_var = if n_fit > 1 {
        fit_targets
            .iter()
            .map(|y| (y - target_mean) * (y - target_mean))
            .sum::<f64>()
            / (n_fit - 1) as f64
    } else {
        0.0
    };
    let target_std = if target_var.sqrt() < 1e-12 {
        1.0
    } else {
        target_var.sqrt()
    };

    let standardized: Vec<Vec<f64>> = (0..data.n_rows())
        .map(|i| features.apply(data.row(i)))
        .collect();
    let scaled_target: Vec<f64> = target
        .iter()
        .map(|y| (y - target_mean) / target_std)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = [d, config.hidden.0, config.hidden.1, 1];
    let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
    let mut net = DenseNet::init(&dims, &acts, &mut rng);
    let mut state = OptimizerState::new(
        &net,
        AdamHyper {
            learning_rate: config.learning_rate,
            ..AdamHyper::default()
        },
    );

    let mut order: Vec<usize> = (0..n_fit).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            let mut batch_loss = 0.0;
            for &i in batch {
                let pass = net.forward(&standardized[i])?;
                let residual = pass.output()[0] - scaled_target[i];
                batch_loss += residual * residual;
                let sample = net.backward(&pass, &[2.0 * residual])?;
                grads.accumulate(&sample);
            }
            batch_loss /= batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    loss: batch_loss,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            nnet::optimizer_step(&mut net, &grads, &mut state);
        }
    }

    let holdout_mse = if n_fit < data.n_rows() {
        let mut sum = 0.0;
        for i in n_fit..data.n_rows() {
            let pass = net.forward(&standardized[i])?;
            let predicted = pass.output()[0] * target_std + target_mean;
            let residual = predicted - target[i];
            sum += residual * residual;
        }
        Some(sum / (data.n_rows() - n_fit) as f64)
    } else {
        None
    };

    Ok(BlackBox::Mlp(MlpRegressor {
        net,
        features,
        target_mean,
        target_std,
        holdout_mse,
    }))
}
