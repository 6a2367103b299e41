//! Minimal feedforward network engine.
//!
//! Dense layers over `f64`, reverse-mode gradients with respect to both
//! parameters and inputs, mean-square-error loss, and Adam. The input
//! gradient is first-class because controller training pushes loss
//! gradients through a frozen imitator network into the controller
//! upstream of it.

pub mod adam;
pub mod modelfile;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use modelfile::ModelFile;
pub use train::{train_epochs, Sample, TrainConfig, TrainReport};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};

/// Neuron nonlinearity.
///
/// `relu(x) = max(x, 0)`; the subgradient at the kink is taken as 0.
/// `leaky_relu` passes `x` for `x ≥ 0` and `alpha·x` otherwise, with the
/// kink derivative taken as `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { alpha: f64 },
}

impl Activation {
    pub fn leaky_default() -> Self {
        Activation::LeakyRelu { alpha: 0.01 }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
        }
    }

    pub fn validate(self) -> Result<()> {
        if let Activation::LeakyRelu { alpha } = self {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidParam(format!(
                    "leaky_relu slope must lie in (0, 1), got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

/// One dense layer: `a = σ(W·x + b)` with `W` row-major `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != input_dim * output_dim || biases.len() != output_dim {
            return Err(Error::Dimension(format!(
                "layer {output_dim}×{input_dim} given {} weights, {} biases",
                weights.len(),
                biases.len()
            )));
        }
        ensure_all_finite(&weights, "weights")?;
        ensure_all_finite(&biases, "biases")?;
        activation.validate()?;
        Ok(Layer {
            input_dim,
            output_dim,
            weights,
            biases,
            activation,
        })
    }

    /// Glorot-uniform initialization, `±√(6/(fan_in+fan_out))`.
    pub fn glorot(input_dim: usize, output_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (input_dim + output_dim) as f64).sqrt();
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Layer {
            input_dim,
            output_dim,
            weights,
            biases: vec![0.0; output_dim],
            activation,
        }
    }

    fn affine_into(&self, input: &[f64], pre: &mut Vec<f64>) {
        pre.clear();
        for o in 0..self.output_dim {
            let row = &self.weights[o * self.input_dim..(o + 1) * self.input_dim];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            acc += self.biases[o];
            pre.push(acc);
        }
    }
}

/// Layered feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer pre- and post-activation record of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache from a forward pass")
    }

    /// Smallest pre-activation magnitude across all kinked layers; used
    /// by gradient checks to stay away from ReLU corners.
    pub fn min_kink_distance(&self, net: &Mlp) -> f64 {
        let mut min = f64::INFINITY;
        for (layer, pre) in net.layers.iter().zip(&self.pre) {
            if matches!(layer.activation, Activation::Identity) {
                continue;
            }
            for z in pre {
                min = min.min(z.abs());
            }
        }
        min
    }
}

/// Parameter-shaped accumulator: one (weights, biases) pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v = 0.0);
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (a, o) in w.iter_mut().zip(ow) {
                *a += o;
            }
            for (a, o) in b.iter_mut().zip(ob) {
                *a += o;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v *= s);
            b.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for (w, b) in &self.layers {
            for v in w.iter().chain(b) {
                m = m.max(v.abs());
            }
        }
        m
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParam("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::Dimension(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].output_dim, pair[1].input_dim
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Seeded skeleton from a dimension list, one activation per layer.
    pub fn from_dims(dims: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} dims need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| Layer::glorot(d[0], d[1], act, rng))
            .collect();
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(input)?;
        Ok(cache.post.into_iter().last().unwrap())
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut cache = ForwardCache {
            input: input.to_vec(),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        let mut current = input;
        for layer in &self.layers {
            let mut pre = Vec::with_capacity(layer.output_dim);
            layer.affine_into(current, &mut pre);
            let post: Vec<f64> = pre.iter().map(|&z| layer.activation.apply(z)).collect();
            cache.pre.push(pre);
            cache.post.push(post);
            current = cache.post.last().unwrap();
        }
        Ok(cache)
    }

    /// Reverse pass. `d_output` is ∂loss/∂(network output); parameter
    /// gradients accumulate into `grads` and the return value is
    /// ∂loss/∂(network input), so a chain of networks back-propagates by
    /// feeding one network's input gradient into the previous one.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_output: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if d_output.len() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "output gradient has {} entries, network produces {}",
                d_output.len(),
                self.output_dim()
            )));
        }
        if cache.pre.len() != self.layers.len() || cache.input.len() != self.input_dim() {
            return Err(Error::Dimension("cache does not match this network".into()));
        }
        let mut g = d_output.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre[l];
            let below: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let (gw, gb) = &mut grads.layers[l];
            let mut g_below = vec![0.0; layer.input_dim];
            for o in 0..layer.output_dim {
                let dz = g[o] * layer.activation.derivative(pre[o]);
                if dz != 0.0 {
                    let row = &layer.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                    let grow = &mut gw[o * layer.input_dim..(o + 1) * layer.input_dim];
                    for i in 0..layer.input_dim {
                        grow[i] += dz * below[i];
                        g_below[i] += dz * row[i];
                    }
                }
                gb[o] += dz;
            }
            g = g_below;
        }
        Ok(g)
    }
}

/// Mean square error with its per-output residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub residuals: Vec<f64>,
}

/// `loss = (1/k) Σ (predicted_i − target_i)²`.
pub fn mse_loss(predicted: &[f64], target: &[f64]) -> Result<LossValue> {
    if predicted.is_empty() {
        return Err(Error::InvalidParam("mse over empty vectors".into()));
    }
    if predicted.len() != target.len() {
        return Err(Error::Dimension(format!(
            "mse over {} predictions vs {} targets",
            predicted.len(),
            target.len()
        )));
    }
    let residuals: Vec<f64> = predicted.iter().zip(target).map(|(p, t)| p - t).collect();
    let value = residuals.iter().map(|r| r * r).sum::<f64>() / predicted.len() as f64;
    Ok(LossValue { value, residuals })
}

/// Gradient of [`mse_loss`] with respect to the predictions, `2·r/k`.
pub fn mse_gradient(loss: &LossValue) -> Vec<f64> {
    let k = loss.residuals.len() as f64;
    loss.residuals.iter().map(|r| 2.0 * r / k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn single_layer(weights: Vec<f64>, input_dim: usize, act: Activation) -> Mlp {
        let out = weights.len() / input_dim;
        Mlp::new(vec![Layer::new(input_dim, out, weights, vec![0.0; out], act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_layer_passes_through() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], 2, Activation::Identity);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = single_layer(vec![1.0, 0.0, 0.0, 1.0], 2, Activation::Relu);
        assert_eq!(net.forward(&[-3.0, 5.0]).unwrap(), vec![0.0, 5.0]);
    }

    #[test]
    fn leaky_relu_scales_negatives() {
        let net = single_layer(vec![1.0], 1, Activation::LeakyRelu { alpha: 0.01 });
        assert_relative_eq!(net.forward(&[-2.0]).unwrap()[0], -0.02, epsilon = 1e-15);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        assert_eq!(mse_loss(&[0.0], &[2.0]).unwrap().value, 4.0);
        assert_eq!(mse_loss(&[1.0, 3.0], &[0.0, 1.0]).unwrap().value, 2.5);
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn scalar_chain_rule() {
        // y = w·x, loss = (y−t)²: ∂loss/∂w = 2(wx−t)·x = 36 at w=2, x=3, t=0.
        let net = single_layer(vec![2.0], 1, Activation::Identity);
        let cache = net.forward_cached(&[3.0]).unwrap();
        let loss = LossValue {
            value: 36.0,
            residuals: vec![6.0],
        };
        let mut grads = Gradients::zeros_like(&net);
        let d_in = net.backward(&cache, &mse_gradient(&loss), &mut grads).unwrap();
        assert_relative_eq!(grads.layers[0].0[0], 36.0, epsilon = 1e-12);
        // ∂loss/∂x = 2(wx−t)·w = 24.
        assert_relative_eq!(d_in[0], 24.0, epsilon = 1e-12);
    }

    #[test]
    fn relu_blocks_gradient_in_flat_region() {
        let net = single_layer(vec![1.0], 1, Activation::Relu);
        let cache = net.forward_cached(&[-1.0]).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        let d_in = net.backward(&cache, &[1.0], &mut grads).unwrap();
        assert_eq!(grads.layers[0].0[0], 0.0);
        assert_eq!(d_in[0], 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = single_layer(vec![1.0], 1, Activation::Identity);
        assert!(net.forward(&[1.0, 2.0]).is_err());
        let cache = net.forward_cached(&[1.0]).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        assert!(net.backward(&cache, &[1.0, 1.0], &mut grads).is_err());
    }

    #[test]
    fn glorot_init_is_seeded() {
        let a = Mlp::from_dims(&[3, 5, 2], &[Activation::Relu, Activation::Identity], &mut seeded(9)).unwrap();
        let b = Mlp::from_dims(&[3, 5, 2], &[Activation::Relu, Activation::Identity], &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        let c = Mlp::from_dims(&[3, 5, 2], &[Activation::Relu, Activation::Identity], &mut seeded(10)).unwrap();
        assert_ne!(a, c);
    }
}
