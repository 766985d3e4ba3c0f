//! Feed-forward multilayer perceptron regressor.
//!
//! Hidden layers share one activation; the output layer is affine with a
//! single unit. Weights are stored row-major as `out x in` so layer `l` maps
//! `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs.

mod io;
mod train;

pub use io::{load_model, save_model, ModelBundle, MODEL_FORMAT, MODEL_VERSION};
pub use train::{train, Optimizer, Samples, TrainHistory};

use serde::{Deserialize, Serialize};

use crate::dataset::{WecLayout, POSITION_FIELDS};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::preprocess::ScalerParams;
use crate::rng::{PinnedRng, STREAM_INIT};

/// Rows per gradient work unit. Fixed so that the summation order, and hence
/// every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation; relu'(0) = 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// Adaptive moment estimation (beta1 0.9, beta2 0.999, eps 1e-8).
    #[default]
    #[serde(alias = "adaptive-moment")]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_dim: POSITION_FIELDS,
            hidden_layers: vec![64, 64],
            activation: Activation::Relu,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 100,
            early_stop_patience: 10,
            optimizer: OptimizerKind::Adam,
            seed: 42,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch size and epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(1);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    /// Per layer, `layer_dims[l + 1] x layer_dims[l]` row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

/// Parameter-shaped gradient (or optimizer moment) buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Flattened view: layer by layer, weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend_from_slice(w);
            v.extend_from_slice(b);
        }
        v
    }

    pub fn is_congruent(&self, model: &MlpModel) -> bool {
        self.weights.len() == model.weights.len()
            && self.biases.len() == model.biases.len()
            && self
                .weights
                .iter()
                .zip(&model.weights)
                .all(|(a, b)| a.len() == b.len())
            && self
                .biases
                .iter()
                .zip(&model.biases)
                .all(|(a, b)| a.len() == b.len())
    }
}

/// He-uniform initialization: weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`
/// (variance `2/fan_in`) drawn layer by layer in row-major order from the
/// pinned init stream; biases zero.
pub fn init_model(config: &MlpConfig) -> Result<MlpModel> {
    config.validate()?;
    let dims = config.layer_dims();
    let mut rng = PinnedRng::new(config.seed, STREAM_INIT);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| rng.uniform(-bound, bound))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpModel {
        layer_dims: dims,
        weights,
        biases,
        activation: config.activation,
    })
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Checks that parameter shapes chain through `layer_dims`.
    pub fn check_shapes(&self) -> Result<()> {
        let dims = &self.layer_dims;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dims {dims:?}")));
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::Shape(format!(
                "output width must be 1, got {}",
                dims.last().unwrap()
            )));
        }
        if self.weights.len() != dims.len() - 1 || self.biases.len() != dims.len() - 1 {
            return Err(Error::Shape(format!(
                "{} weight and {} bias tensors for {} layers",
                self.weights.len(),
                self.biases.len(),
                dims.len() - 1
            )));
        }
        for (l, pair) in dims.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] {
                return Err(Error::Shape(format!(
                    "layer {l} weights hold {} values, expected {}x{}",
                    self.weights[l].len(),
                    pair[1],
                    pair[0]
                )));
            }
            if self.biases[l].len() != pair[1] {
                return Err(Error::Shape(format!(
                    "layer {l} biases hold {} values, expected {}",
                    self.biases[l].len(),
                    pair[1]
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {width}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Runs the network keeping every pre-activation; returns the output.
    fn forward_trace(&self, input: &[f64], pre: &mut [Vec<f64>], post: &mut [Vec<f64>]) -> f64 {
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let (before, after) = post.split_at_mut(l);
            let a_in: &[f64] = if l == 0 { input } else { &before[l - 1] };
            let z = &mut pre[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                z[o] = b[o] + row.iter().zip(a_in).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            let a = &mut after[0];
            if l == last {
                a.copy_from_slice(z);
            } else {
                for (ai, &zi) in a.iter_mut().zip(z.iter()) {
                    *ai = self.activation.apply(zi);
                }
            }
        }
        post[last][0]
    }

    fn buffers(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let make = || {
            self.layer_dims[1..]
                .iter()
                .map(|&d| vec![0.0; d])
                .collect::<Vec<_>>()
        };
        (make(), make())
    }

    /// Prediction for one feature row.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        self.check_input(features.len())?;
        let (mut pre, mut post) = self.buffers();
        Ok(self.forward_trace(features, &mut pre, &mut post))
    }

    /// Predictions for every row of `x`, in row order.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x.cols())?;
        Ok(par::map_range(x.rows(), |i| {
            let (mut pre, mut post) = self.buffers();
            self.forward_trace(x.row(i), &mut pre, &mut post)
        }))
    }

    /// Accumulates `d(scale * (pred - y)^2) / d(params)` into `grads` and
    /// returns the squared residual.
    #[allow(clippy::too_many_arguments)]
    fn backprop_into(
        &self,
        input: &[f64],
        target: f64,
        scale: f64,
        grads: &mut Gradients,
        pre: &mut [Vec<f64>],
        post: &mut [Vec<f64>],
        delta: &mut Vec<f64>,
        delta_prev: &mut Vec<f64>,
    ) -> f64 {
        let pred = self.forward_trace(input, pre, post);
        let resid = pred - target;
        delta.clear();
        delta.push(2.0 * scale * resid);
        for l in (0..self.num_layers()).rev() {
            let n_in = self.layer_dims[l];
            let a_in: &[f64] = if l == 0 { input } else { &post[l - 1] };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
            }
            if l > 0 {
                let w = &self.weights[l];
                delta_prev.clear();
                delta_prev.resize(n_in, 0.0);
                for (o, &d) in delta.iter().enumerate() {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    delta_prev
                        .iter_mut()
                        .zip(row)
                        .for_each(|(dp, wi)| *dp += wi * d);
                }
                for (dp, &z) in delta_prev.iter_mut().zip(&pre[l - 1]) {
                    *dp *= self.activation.derivative(z);
                }
                std::mem::swap(delta, delta_prev);
            }
        }
        resid * resid
    }

    /// Sum of squared residuals and the gradient of `scale * SSE` over a
    /// contiguous row range.
    fn chunk_gradients(
        &self,
        x: &Matrix,
        y: &[f64],
        rows: std::ops::Range<usize>,
        scale: f64,
    ) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let (mut pre, mut post) = self.buffers();
        let (mut delta, mut delta_prev) = (Vec::new(), Vec::new());
        let mut sse = 0.0;
        for i in rows {
            sse += self.backprop_into(
                x.row(i),
                y[i],
                scale,
                &mut grads,
                &mut pre,
                &mut post,
                &mut delta,
                &mut delta_prev,
            );
        }
        (sse, grads)
    }
}

/// Mean squared error over a batch and its gradient with respect to every
/// parameter (reverse-mode chain rule).
pub fn loss_and_gradients(model: &MlpModel, x: &Matrix, y: &[f64]) -> Result<(f64, Gradients)> {
    model.check_input(x.cols())?;
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows with {} targets",
            x.rows(),
            y.len()
        )));
    }
    let n = x.rows();
    let scale = 1.0 / n as f64;
    let chunks = n.div_ceil(GRAD_CHUNK);
    let parts = par::map_range(chunks, |c| {
        let start = c * GRAD_CHUNK;
        model.chunk_gradients(x, y, start..(start + GRAD_CHUNK).min(n), scale)
    });
    let mut iter = parts.into_iter();
    let (mut sse, mut grads) = iter.next().expect("at least one chunk");
    for (s, g) in iter {
        sse += s;
        grads.add_assign(&g);
    }
    Ok((sse * scale, grads))
}

/// Mean squared error of the model on a set.
pub fn mse(model: &MlpModel, x: &Matrix, y: &[f64]) -> Result<f64> {
    let pred = model.predict(x)?;
    if pred.len() != y.len() || y.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            y.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64)
}

/// Physical-unit predictions for raw layouts: scale the coordinates, run the
/// network and map the output back through the target scaler.
pub fn predict_batch(
    model: &MlpModel,
    feature_scaler: &ScalerParams,
    target_scaler: &ScalerParams,
    layouts: &[WecLayout],
) -> Result<Vec<f64>> {
    if feature_scaler.features() != model.input_dim() || model.input_dim() != POSITION_FIELDS {
        return Err(Error::Shape(format!(
            "feature scaler has {} features, model expects {}, layouts have {POSITION_FIELDS}",
            feature_scaler.features(),
            model.input_dim()
        )));
    }
    if target_scaler.features() != 1 {
        return Err(Error::Shape(format!(
            "target scaler must have 1 feature, has {}",
            target_scaler.features()
        )));
    }
    let mut x = Matrix::zeros(layouts.len(), POSITION_FIELDS);
    for (i, l) in layouts.iter().enumerate() {
        for (j, v) in l.flatten().iter().enumerate() {
            x.set(i, j, feature_scaler.transform_value(j, *v));
        }
    }
    let out = model.predict(&x)?;
    Ok(target_scaler.inverse_values(0, &out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(hidden: Vec<usize>, input_dim: usize) -> MlpConfig {
        MlpConfig {
            input_dim,
            hidden_layers: hidden,
            ..Default::default()
        }
    }

    #[test]
    fn default_dims() {
        let m = init_model(&MlpConfig::default()).unwrap();
        assert_eq!(m.layer_dims, vec![32, 64, 64, 1]);
        m.check_shapes().unwrap();
        assert_eq!(m.parameter_count(), 32 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn init_is_deterministic() {
        let c = tiny_config(vec![4], 32);
        assert_eq!(init_model(&c).unwrap(), init_model(&c).unwrap());
        let other = MlpConfig {
            seed: 7,
            ..c.clone()
        };
        assert_ne!(init_model(&c).unwrap(), init_model(&other).unwrap());
        assert!(init_model(&c)
            .unwrap()
            .biases
            .iter()
            .flatten()
            .all(|&b| b == 0.0));
    }

    #[test]
    fn zero_model_predicts_zero() {
        let mut m = init_model(&MlpConfig::default()).unwrap();
        m.weights.iter_mut().flatten().for_each(|w| *w = 0.0);
        assert_eq!(m.forward(&[0.3; 32]).unwrap(), 0.0);
    }

    #[test]
    fn single_hidden_unit_by_hand() {
        // h = relu(0.5*x0 - 0.25*x1 + 0.1); y = 2*h - 0.3
        let m = MlpModel {
            layer_dims: vec![2, 1, 1],
            weights: vec![vec![0.5, -0.25], vec![2.0]],
            biases: vec![vec![0.1], vec![-0.3]],
            activation: Activation::Relu,
        };
        assert_eq!(m.forward(&[1.0, 2.0]).unwrap(), 2.0 * 0.1 - 0.3);
        assert_eq!(m.forward(&[0.0, 4.0]).unwrap(), -0.3);
    }

    #[test]
    fn width_mismatch_errors() {
        let m = init_model(&tiny_config(vec![3], 4)).unwrap();
        assert!(m.forward(&[0.0; 5]).is_err());
        assert!(m.predict(&Matrix::zeros(2, 3)).is_err());
        assert!(loss_and_gradients(&m, &Matrix::zeros(2, 4), &[0.0]).is_err());
    }

    #[test]
    fn perfect_batch_has_zero_gradient() {
        let m = init_model(&tiny_config(vec![5, 3], 4)).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [0.9, 0.1, 0.5, 0.2]]).unwrap();
        let y = m.predict(&x).unwrap();
        let (loss, g) = loss_and_gradients(&m, &x, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|&v| v == 0.0));
        assert!(g.is_congruent(&m));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(init_model(&tiny_config(vec![0], 4)).is_err());
        assert!(init_model(&MlpConfig {
            learning_rate: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(init_model(&MlpConfig {
            batch_size: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn shape_check_catches_bad_weights() {
        let mut m = init_model(&tiny_config(vec![3], 4)).unwrap();
        m.weights[0].pop();
        assert!(m.check_shapes().is_err());
    }
}
