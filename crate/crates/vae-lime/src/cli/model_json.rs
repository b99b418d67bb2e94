//! The JSON model schema shared by every trained artifact.
//!
//! Schema (version 1):
//! `{schema_version, kind, input_dim, latent_dim?, standardization{means[],
//! stds[]}, layers[{rows, cols, weights[row-major], bias[], activation}]}`
//! plus kind-specific extensions: VAE files carry `encoder_layers` (how
//! many of `layers` form the encoder) and `latent_sigma`; MLP files carry
//! `target_mean`, `target_std`, and optionally `holdout_mse`; analytic
//! files carry `analytic_c` and `analytic_linear` with an empty `layers`.
//! Every file written by the tool also embeds a `meta` block with
//! {tool_version, command, seed, config}.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blackbox::{AnalyticSpec, BlackBox, MlpRegressor};
use crate::dataio::Standardization;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nnet::{Activation, DenseNet, Layer};
use crate::vae::VaeModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerJson {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: String,
    pub input_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_dim: Option<usize>,
    pub standardization: Standardization,
    pub layers: Vec<LayerJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_sigma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_c: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_linear: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn parse_activation(name: &str) -> Result<Activation> {
    match name {
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::InvalidConfig(format!(
            "unknown activation `{other}` in model file (expected tanh or identity)"
        ))),
    }
}

fn net_to_layers(net: &DenseNet) -> Vec<LayerJson> {
    net.layers()
        .iter()
        .map(|l| LayerJson {
            rows: l.out_dim(),
            cols: l.in_dim(),
            weights: l.weights.data().to_vec(),
            bias: l.bias.clone(),
            activation: activation_name(l.activation).to_string(),
        })
        .collect()
}

fn layers_to_net(layers: &[LayerJson], what: &str) -> Result<DenseNet> {
    if layers.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} has no layers")));
    }
    let mut built = Vec::with_capacity(layers.len());
    let mut previous_out: Option<usize> = None;
    for (i, l) in layers.iter().enumerate() {
        if l.weights.len() != l.rows * l.cols {
            return Err(Error::InvalidConfig(format!(
                "{what} layer {i}: weights length {} does not match {}x{}",
                l.weights.len(),
                l.rows,
                l.cols
            )));
        }
        if l.bias.len() != l.rows {
            return Err(Error::InvalidConfig(format!(
                "{what} layer {i}: bias length {} does not match {} rows",
                l.bias.len(),
                l.rows
            )));
        }
        if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{what} layer {i}: non-finite parameter"
            )));
        }
        if let Some(p) = previous_out {
            if l.cols != p {
                return Err(Error::InvalidConfig(format!(
                    "{what} layer {i}: input dim {} does not chain from previous output {p}",
                    l.cols
                )));
            }
        }
        previous_out = Some(l.rows);
        built.push(Layer::new(
            Matrix::from_vec(l.rows, l.cols, l.weights.clone()),
            l.bias.clone(),
            parse_activation(&l.activation)?,
        ));
    }
    Ok(DenseNet::new(built))
}

pub fn vae_to_file(model: &VaeModel, meta: serde_json::Value) -> ModelFile {
    let mut layers = net_to_layers(&model.encoder);
    let encoder_layers = layers.len();
    layers.extend(net_to_layers(&model.decoder));
    ModelFile {
        schema_version: SCHEMA_VERSION,
        kind: "vae".to_string(),
        input_dim: model.input_dim,
        latent_dim: Some(model.latent_dim),
        standardization: model.standardization.clone(),
        layers,
        encoder_layers: Some(encoder_layers),
        latent_sigma: Some(model.latent_sigma.clone()),
        target_mean: None,
        target_std: None,
        holdout_mse: None,
        analytic_c: None,
        analytic_linear: None,
        meta: Some(meta),
    }
}

pub fn vae_from_file(file: &ModelFile) -> Result<VaeModel> {
    if file.kind != "vae" {
        return Err(Error::InvalidConfig(format!(
            "model file holds kind `{}`, expected `vae`",
            file.kind
        )));
    }
    let n_enc = file
        .encoder_layers
        .ok_or_else(|| Error::InvalidConfig("vae model file is missing `encoder_layers`".into()))?;
    if n_enc == 0 || n_enc >= file.layers.len() {
        return Err(Error::InvalidConfig(format!(
            "encoder_layers = {n_enc} does not split {} layers into encoder and decoder",
            file.layers.len()
        )));
    }
    let latent_sigma = file
        .latent_sigma
        .clone()
        .ok_or_else(|| Error::InvalidConfig("vae model file is missing `latent_sigma`".into()))?;
    let encoder = layers_to_net(&file.layers[..n_enc], "encoder")?;
    let decoder = layers_to_net(&file.layers[n_enc..], "decoder")?;
    if encoder.input_dim() != file.input_dim {
        return Err(Error::InvalidConfig(format!(
            "encoder input dim {} does not match input_dim {}",
            encoder.input_dim(),
            file.input_dim
        )));
    }
    if let Some(declared) = file.latent_dim {
        if encoder.output_dim() != 2 * declared {
            return Err(Error::InvalidConfig(format!(
                "encoder output dim {} does not match 2·latent_dim = {}",
                encoder.output_dim(),
                2 * declared
            )));
        }
    }
    let model = VaeModel::new(encoder, decoder, file.standardization.clone(), latent_sigma)
        .map_err(|e| Error::InvalidConfig(format!("invalid vae model file: {e}")))?;
    Ok(model)
}

pub fn blackbox_to_file(blackbox: &BlackBox, meta: serde_json::Value) -> ModelFile {
    match blackbox {
        BlackBox::Mlp(mlp) => ModelFile {
            schema_version: SCHEMA_VERSION,
            kind: "mlp".to_string(),
            input_dim: mlp.net.input_dim(),
            latent_dim: None,
            standardization: mlp.features.clone(),
            layers: net_to_layers(&mlp.net),
            encoder_layers: None,
            latent_sigma: None,
            target_mean: Some(mlp.target_mean),
            target_std: Some(mlp.target_std),
            holdout_mse: mlp.holdout_mse,
            analytic_c: None,
            analytic_linear: None,
            meta: Some(meta),
        },
        BlackBox::Analytic(spec) => ModelFile {
            schema_version: SCHEMA_VERSION,
            kind: "analytic".to_string(),
            input_dim: spec.input_dim(),
            latent_dim: None,
            standardization: Standardization {
                means: vec![0.0; spec.input_dim()],
                stds: vec![1.0; spec.input_dim()],
            },
            layers: Vec::new(),
            encoder_layers: None,
            latent_sigma: None,
            target_mean: None,
            target_std: None,
            holdout_mse: None,
            analytic_c: Some(spec.c),
            analytic_linear: Some(spec.linear.clone()),
            meta: Some(meta),
        },
    }
}

pub fn blackbox_from_file(file: &ModelFile) -> Result<BlackBox> {
    match file.kind.as_str() {
        "mlp" => {
            let net = layers_to_net(&file.layers, "mlp")?;
            if net.input_dim() != file.input_dim {
                return Err(Error::InvalidConfig(format!(
                    "mlp input dim {} does not match input_dim {}",
                    net.input_dim(),
                    file.input_dim
                )));
            }
            if net.output_dim() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "mlp output dim must be 1, got {}",
                    net.output_dim()
                )));
            }
            if file.standardization.len() != file.input_dim {
                return Err(Error::InvalidConfig(
                    "mlp standardization length does not match input_dim".into(),
                ));
            }
            let target_std = file.target_std.ok_or_else(|| {
                Error::InvalidConfig("mlp model file is missing `target_std`".into())
            })?;
            if !(target_std > 0.0 && target_std.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "target_std must be positive, got {target_std}"
                )));
            }
            let target_mean = file.target_mean.ok_or_else(|| {
                Error::InvalidConfig("mlp model file is missing `target_mean`".into())
            })?;
            Ok(BlackBox::Mlp(MlpRegressor {
                net,
                features: file.standardization.clone(),
                target_mean,
                target_std,
                holdout_mse: file.holdout_mse,
            }))
        }
        "analytic" => {
            let c = file.analytic_c.ok_or_else(|| {
                Error::InvalidConfig("analytic model file is missing `analytic_c`".into())
            })?;
            let linear = file.analytic_linear.clone().ok_or_else(|| {
                Error::InvalidConfig("analytic model file is missing `analytic_linear`".into())
            })?;
            let spec = AnalyticSpec::new(c, linear)
                .map_err(|e| Error::InvalidConfig(format!("invalid analytic spec: {e}")))?;
            if spec.input_dim() != file.input_dim {
                return Err(Error::InvalidConfig(format!(
                    "analytic spec implies input dim {}, file says {}",
                    spec.input_dim(),
                    file.input_dim
                )));
            }
            Ok(BlackBox::Analytic(spec))
        }
        other => Err(Error::InvalidConfig(format!(
            "model file holds kind `{other}`, expected `mlp` or `analytic`"
        ))),
    }
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    let body = serde_json::to_string_pretty(file).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, body + "\n").map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let body = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&body).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        )));
    }
    Ok(file)
}
