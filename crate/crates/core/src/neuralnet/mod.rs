//! A small dense-network engine: input batch normalization, fully connected
//! layers with ReLU or linear activations, L2-regularized MSE loss, exact
//! backpropagation and Adam.
//!
//! Weight matrices are stored `in × out` so that a batch `X` (rows are
//! samples) maps to `X·W + b`.

mod adam;
mod checkpoint;
mod gradcheck;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Linear => "linear",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Self::Relu),
            "linear" => Some(Self::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, activation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.nrows(), self.weights.ncols(), self.activation)
    }
}

/// Per-feature normalization of the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    /// Weight of the old running statistic in each update.
    pub momentum: f64,
    pub epsilon: f64,
    /// When off the layer is a pass-through and gamma/beta receive zero
    /// gradient.
    pub enabled: bool,
}

impl BatchNorm {
    pub const DEFAULT_MOMENTUM: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: Self::DEFAULT_MOMENTUM,
            epsilon: Self::DEFAULT_EPSILON,
            enabled: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn normalize_with(&self, x: ArrayView2<f64>, mean: &Array1<f64>, var: &Array1<f64>) -> Array2<f64> {
        if !self.enabled {
            return x.to_owned();
        }
        let inv_std = var.mapv(|v| 1.0 / (v + self.epsilon).sqrt());
        let mut x_hat = x.to_owned();
        for mut row in x_hat.rows_mut() {
            row -= mean;
            row *= &inv_std;
        }
        x_hat
    }

    fn scale_shift(&self, x_hat: &Array2<f64>) -> Array2<f64> {
        if !self.enabled {
            return x_hat.clone();
        }
        let mut y = x_hat.clone();
        for mut row in y.rows_mut() {
            row *= &self.gamma;
            row += &self.beta;
        }
        y
    }
}

/// Batch statistics observed during a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub batch_size: usize,
}

/// Everything backpropagation needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    x_hat: Array2<f64>,
    layer_inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients of the loss for every trainable parameter, in the same order as
/// [`Mlp::param_slices_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![
            self.gamma.as_slice().expect("contiguous"),
            self.beta.as_slice().expect("contiguous"),
        ];
        for l in &self.layers {
            out.push(l.weights.as_slice().expect("contiguous"));
            out.push(l.bias.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.gamma.as_slice_mut().expect("contiguous"),
            self.beta.as_slice_mut().expect("contiguous"),
        ];
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("contiguous"));
            out.push(l.bias.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Multilayer perceptron with batch normalization on its input.
#[derive(Debug, Clone)]
pub struct Mlp {
    bn: BatchNorm,
    layers: Vec<Dense>,
    l2_coeff: f64,
    // Bumped on every parameter change so stale caches can be detected.
    version: u64,
}

// The version counter is bookkeeping, not part of the network.
impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.bn == other.bn && self.layers == other.layers && self.l2_coeff == other.l2_coeff
    }
}

impl Mlp {
    /// Fan-based uniform initialization, `U(±√(6/(in+out)))`, zero biases.
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], l2_coeff: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(specs, l2_coeff)?;
        for layer in &mut net.layers {
            let (fan_in, fan_out) = layer.weights.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer.weights.mapv_inplace(|_| rng.random_range(-limit..limit));
        }
        Ok(net)
    }

    /// Drops the input normalization (pass-through).
    pub fn without_batch_norm(mut self) -> Self {
        self.bn.enabled = false;
        self.version += 1;
        self
    }

    /// All weights and biases zero; BN starts as gamma = 1, beta = 0 with
    /// running statistics mean 0, variance 1.
    pub fn zeros(specs: &[LayerSpec], l2_coeff: f64) -> Result<Self> {
        validate_specs(specs)?;
        if !(l2_coeff >= 0.0 && l2_coeff.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2 coefficient must be >= 0, got {l2_coeff}")));
        }
        let layers = specs
            .iter()
            .map(|s| Dense {
                weights: Array2::zeros((s.in_dim, s.out_dim)),
                bias: Array1::zeros(s.out_dim),
                activation: s.activation,
            })
            .collect();
        Ok(Self {
            bn: BatchNorm::new(specs[0].in_dim),
            layers,
            l2_coeff,
            version: 0,
        })
    }

    pub(crate) fn from_parts(bn: BatchNorm, layers: Vec<Dense>, l2_coeff: f64) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(Dense::spec).collect();
        validate_specs(&specs)?;
        check_len("batch-norm width", specs[0].in_dim, bn.dim())?;
        Ok(Self { bn, layers, l2_coeff, version: 0 })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Dense::spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weights.ncols()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn batch_norm(&self) -> &BatchNorm {
        &self.bn
    }

    pub fn l2_coeff(&self) -> f64 {
        self.l2_coeff
    }

    pub fn param_count(&self) -> usize {
        2 * self.bn.dim() + self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum::<usize>()
    }

    /// Direct access to layers for tests and hand-built networks. Counts as a
    /// parameter change.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn batch_norm_mut(&mut self) -> &mut BatchNorm {
        self.version += 1;
        &mut self.bn
    }

    /// Trainable parameters: gamma, beta, then `(W, b)` per layer.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = vec![
            self.bn.gamma.as_slice_mut().expect("contiguous"),
            self.bn.beta.as_slice_mut().expect("contiguous"),
        ];
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("contiguous"));
            out.push(l.bias.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        let bn = &self.bn;
        [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var]
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
            && self
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        check_len("network input width", self.input_dim(), x.ncols())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    fn dense_chain(&self, bn_out: Array2<f64>, mut record: Option<(&mut Vec<Array2<f64>>, &mut Vec<Array2<f64>>)>) -> Array2<f64> {
        let mut a = bn_out;
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias;
            let next = match layer.activation {
                Activation::Relu => z.mapv(|v| v.max(0.0)),
                Activation::Linear => z.clone(),
            };
            if let Some((inputs, pre)) = record.as_mut() {
                inputs.push(a);
                pre.push(z);
            }
            a = next;
        }
        a
    }

    /// Dispatches on `mode`; training mode updates the BN running statistics.
    pub fn forward(&mut self, x: ArrayView2<f64>, mode: Mode) -> Result<Array2<f64>> {
        match mode {
            Mode::Train => Ok(self.forward_train(x)?.output),
            Mode::Infer => self.infer(x),
        }
    }

    /// Training-mode pass using batch statistics, without touching the
    /// running statistics.
    pub fn forward_train_frozen(&self, x: ArrayView2<f64>) -> Result<(ForwardCache, BatchStats)> {
        self.check_input(&x)?;
        let b = x.nrows();
        if b == 0 {
            return Err(Error::Rejected("empty batch".into()));
        }
        let mean = x.mean_axis(Axis(0)).expect("nonempty");
        let var = x.var_axis(Axis(0), 0.0);
        let x_hat = self.bn.normalize_with(x, &mean, &var);
        let y = self.bn.scale_shift(&x_hat);
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let output = self.dense_chain(y, Some((&mut inputs, &mut pre)));
        Ok((
            ForwardCache {
                version: self.version,
                x_hat,
                layer_inputs: inputs,
                pre_activations: pre,
                output,
            },
            BatchStats { mean, var, batch_size: b },
        ))
    }

    /// Training-mode pass; folds the batch statistics into the running ones.
    pub fn forward_train(&mut self, x: ArrayView2<f64>) -> Result<ForwardPass> {
        let (cache, stats) = self.forward_train_frozen(x)?;
        let m = self.bn.momentum;
        // Biased batch variance, so inference on a fixed batch converges to
        // exactly what training saw.
        self.bn.running_mean = &self.bn.running_mean * m + &stats.mean * (1.0 - m);
        self.bn.running_var = &self.bn.running_var * m + &stats.var * (1.0 - m);
        // Running statistics are not trainable parameters, so the cache stays
        // valid for backpropagation.
        Ok(ForwardPass {
            output: cache.output.clone(),
            cache,
        })
    }

    /// Inference-mode pass using the running statistics.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let x_hat = self.bn.normalize_with(x, &self.bn.running_mean, &self.bn.running_var);
        Ok(self.dense_chain(self.bn.scale_shift(&x_hat), None))
    }

    /// Inference on a single sample.
    pub fn infer_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Sum of squared weights over every dense layer (biases and BN
    /// parameters excluded).
    pub fn weight_penalty(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Exact gradients of [`loss_mse_l2`] for the batch cached in `cache`.
    pub fn backward(&self, cache: &ForwardCache, label: ArrayView2<f64>) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let out = &cache.output;
        if out.dim() != label.dim() {
            return Err(Error::DimensionMismatch {
                context: "backward: label shape",
                expected: out.len(),
                actual: label.len(),
            });
        }
        let s = out.nrows() as f64;
        let mut grad_a = (out - &label) * (2.0 / s);
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[idx];
            let grad_z = match layer.activation {
                Activation::Relu => {
                    let mut g = grad_a;
                    g.zip_mut_with(z, |g, &z| {
                        if z <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    g
                }
                Activation::Linear => grad_a,
            };
            let input = &cache.layer_inputs[idx];
            let mut grad_w = input.t().dot(&grad_z);
            grad_w.scaled_add(2.0 * self.l2_coeff, &layer.weights);
            let grad_b = grad_z.sum_axis(Axis(0));
            grad_a = grad_z.dot(&layer.weights.t());
            layer_grads.push(DenseGrad { weights: grad_w, bias: grad_b });
        }
        layer_grads.reverse();
        // grad_a now holds dL/d(BN output).
        let (gamma, beta) = if self.bn.enabled {
            ((&grad_a * &cache.x_hat).sum_axis(Axis(0)), grad_a.sum_axis(Axis(0)))
        } else {
            (Array1::zeros(self.bn.dim()), Array1::zeros(self.bn.dim()))
        };
        Ok(Gradients { gamma, beta, layers: layer_grads })
    }
}

/// Output of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Array2<f64>,
    pub cache: ForwardCache,
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("network needs at least one layer".into()));
    }
    for s in specs {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidConfig(format!("layer dims must be positive: {s:?}")));
        }
    }
    for w in specs.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::InvalidConfig(format!(
                "layer dims do not chain: {} -> {}",
                w[0].out_dim, w[1].in_dim
            )));
        }
    }
    Ok(())
}

/// `(1/S) Σ_s ‖label_s − pred_s‖² + β Σ_ℓ ‖W_ℓ‖²`.
pub fn loss_mse_l2(pred: ArrayView2<f64>, label: ArrayView2<f64>, net: &Mlp) -> Result<f64> {
    Ok(mse(pred, label)? + net.l2_coeff * net.weight_penalty())
}

/// Data term only: mean over samples of the squared error norm.
pub fn mse(pred: ArrayView2<f64>, label: ArrayView2<f64>) -> Result<f64> {
    if pred.dim() != label.dim() {
        return Err(Error::DimensionMismatch {
            context: "loss: prediction vs label",
            expected: label.len(),
            actual: pred.len(),
        });
    }
    let s = pred.nrows().max(1) as f64;
    Ok(pred.iter().zip(label.iter()).map(|(p, l)| (l - p) * (l - p)).sum::<f64>() / s)
}
