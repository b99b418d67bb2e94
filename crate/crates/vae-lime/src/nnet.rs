//! Minimal fully-connected network with analytic backpropagation and an
//! adaptive-moment gradient-descent optimizer.
//!
//! This is the shared engine under both the variational autoencoder and the
//! MLP black box. Activations are restricted to `tanh` on hidden layers and
//! identity on outputs; training is single-threaded and seed-deterministic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value `a`.
    /// For tanh, a = tanh(z) gives d/dz = 1 - a².
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: `a = act(W x + b)` with `W` of shape out×in.
#[derive(Debug, Clone)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Self {
        assert_eq!(weights.rows(), bias.len(), "layer bias length mismatch");
        Layer {
            weights,
            bias,
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// A stack of dense layers with chained dimensions.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

impl DenseNet {
    pub fn new(layers: Vec<Layer>) -> Self {
        assert!(!layers.is_empty(), "a net needs at least one layer");
        for pair in layers.windows(2) {
            assert_eq!(
                pair[0].out_dim(),
                pair[1].in_dim(),
                "adjacent layer dimensions do not chain"
            );
        }
        DenseNet { layers }
    }

    /// Seeded initialization: weights uniform in (−a, a) with
    /// a = √(6/(fan_in+fan_out)), biases zero.
    pub fn init(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(
            activations.len(),
            dims.len() - 1,
            "one activation per layer"
        );
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-a..a));
                Layer::new(weights, vec![0.0; fan_out], activation)
            })
            .collect();
        DenseNet::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access for parameter surgery (tests, deserialization).
    /// Layer dimensions must stay chained; nothing revalidates here.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Forward pass, caching per-layer inputs and post-activations for
    /// [`DenseNet::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "nnet forward input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        debug_assert!(x.iter().all(|v| v.is_finite()), "non-finite forward input");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut a = layer.weights.matvec(&current);
            for (v, b) in a.iter_mut().zip(&layer.bias) {
                *v = layer.activation.apply(*v + b);
            }
            inputs.push(std::mem::replace(&mut current, a.clone()));
            outputs.push(a);
        }
        Ok(ForwardPass { inputs, outputs })
    }

    /// Backpropagation from a gradient with respect to the net output.
    /// Returns per-layer parameter gradients and the gradient with respect
    /// to the input.
    pub fn backward(&self, cache: &ForwardPass, output_gradient: &[f64]) -> Result<Gradients> {
        assert_eq!(
            cache.outputs.len(),
            self.layers.len(),
            "cache does not match this net"
        );
        if output_gradient.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "nnet backward output gradient",
                expected: self.output_dim(),
                actual: output_gradient.len(),
            });
        }
        let mut layer_grads: Vec<LayerGradients> = self
            .layers
            .iter()
            .map(|l| LayerGradients {
                weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                bias: vec![0.0; l.out_dim()],
            })
            .collect();

        let mut upstream = output_gradient.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[idx];
            let output = &cache.outputs[idx];
            // dL/dz = dL/da ⊙ act'(z), with act' read off the output.
            let dz: Vec<f64> = upstream
                .iter()
                .zip(output)
                .map(|(g, &a)| g * layer.activation.derivative_from_output(a))
                .collect();
            let grads = &mut layer_grads[idx];
            for (r, &dzr) in dz.iter().enumerate() {
                grads.bias[r] = dzr;
                for (c, &xc) in input.iter().enumerate() {
                    grads.weights[(r, c)] = dzr * xc;
                }
            }
            let mut downstream = vec![0.0; layer.in_dim()];
            for (r, &dzr) in dz.iter().enumerate() {
                let row = layer.weights.row(r);
                for (c, d) in downstream.iter_mut().enumerate() {
                    *d += row[c] * dzr;
                }
            }
            upstream = downstream;
        }
        Ok(Gradients {
            layers: layer_grads,
            input: upstream,
        })
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients mirroring a net's shapes, plus the input gradient.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerGradients {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for r in 0..mine.weights.rows() {
                for c in 0..mine.weights.cols() {
                    mine.weights[(r, c)] += theirs.weights[(r, c)];
                }
            }
            for (b, o) in mine.bias.iter_mut().zip(&theirs.bias) {
                *b += o;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for r in 0..layer.weights.rows() {
                for c in 0..layer.weights.cols() {
                    layer.weights[(r, c)] *= factor;
                }
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }
}

/// Hyperparameters of the adaptive-moment update.
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 1e-3,
            decay1: 0.9,
            decay2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus step counter for one net.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    first: Vec<LayerGradients>,
    second: Vec<LayerGradients>,
    step: u64,
    pub hyper: AdamHyper,
}

impl OptimizerState {
    pub fn new(net: &DenseNet, hyper: AdamHyper) -> Self {
        let zeros = || Gradients::zeros_like(net).layers;
        OptimizerState {
            first: zeros(),
            second: zeros(),
            step: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[LayerGradients] {
        &self.first
    }

    pub fn second_moments(&self) -> &[LayerGradients] {
        &self.second
    }
}

/// One adaptive-moment update with bias-corrected moments.
pub fn optimizer_step(net: &mut DenseNet, grads: &Gradients, state: &mut OptimizerState) {
    assert_eq!(
        grads.layers.len(),
        net.layers.len(),
        "gradient shape mismatch"
    );
    state.step += 1;
    let h = state.hyper;
    let bias1 = 1.0 - h.decay1.powi(state.step as i32);
    let bias2 = 1.0 - h.decay2.powi(state.step as i32);

    let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
        *m = h.decay1 * *m + (1.0 - h.decay1) * grad;
        *v = h.decay2 * *v + (1.0 - h.decay2) * grad * grad;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *param -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
    };

    for (idx, layer) in net.layers.iter_mut().enumerate() {
        let g = &grads.layers[idx];
        assert_eq!(g.weights.rows(), layer.weights.rows());
        assert_eq!(g.weights.cols(), layer.weights.cols());
        for r in 0..layer.weights.rows() {
            for c in 0..layer.weights.cols() {
                update(
                    &mut layer.weights[(r, c)],
                    g.weights[(r, c)],
                    &mut state.first[idx].weights[(r, c)],
                    &mut state.second[idx].weights[(r, c)],
                );
            }
        }
        for i in 0..layer.bias.len() {
            update(
                &mut layer.bias[i],
                g.bias[i],
                &mut state.first[idx].bias[i],
                &mut state.second[idx].bias[i],
            );
        }
    }
}

/// Compares analytic backprop gradients against central finite differences
/// (h = 1e-5) for a scalar loss of the net output.
///
/// The closure returns the loss value and its gradient with respect to the
/// output vector. Returns the worst relative discrepancy
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)` over all
/// parameters.
pub fn gradient_check<F>(net: &DenseNet, input: &[f64], loss: F) -> Result<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const H: f64 = 1e-5;
    let pass = net.forward(input)?;
    let (_, output_grad) = loss(pass.output());
    let analytic = net.backward(&pass, &output_grad)?;

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let n_layers = net.layers.len();
    for idx in 0..n_layers {
        let (rows, cols) = {
            let l = &net.layers[idx];
            (l.out_dim(), l.in_dim())
        };
        for r in 0..rows {
            for c in 0..cols {
                let original = probe.layers[idx].weights[(r, c)];
                probe.layers[idx].weights[(r, c)] = original + H;
                let plus = loss(probe.forward(input)?.output()).0;
                probe.layers[idx].weights[(r, c)] = original - H;
                let minus = loss(probe.forward(input)?.output()).0;
                probe.layers[idx].weights[(r, c)] = original;
                let numeric = (plus - minus) / (2.0 * H);
                worst = worst.max(relative_discrepancy(
                    analytic.layers[idx].weights[(r, c)],
                    numeric,
                ));
            }
        }
        for i in 0..rows {
            let original = probe.layers[idx].bias[i];
            probe.layers[idx].bias[i] = original + H;
            let plus = loss(probe.forward(input)?.output()).0;
            probe.layers[idx].bias[i] = original - H;
            let minus = loss(probe.forward(input)?.output()).0;
            probe.layers[idx].bias[i] = original;
            let numeric = (plus - minus) / (2.0 * H);
            worst = worst.max(relative_discrepancy(analytic.layers[idx].bias[i], numeric));
        }
    }
    Ok(worst)
}

pub fn relative_discrepancy(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}
