//! Coarse model: a ReLU multilayer perceptron mapping
//! `(alpha, s0, k_cond, h_coef, t_inf, x, t)` to a temperature, trained by
//! mini-batch gradient descent on squared response residuals.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::heat_model::{network_input, Dataset, HeatParams, ProbeSet, N_PARAMS};
use crate::math;

/// Five parameters plus `x` and `t`.
pub const INPUT_DIM: usize = 7;
pub const DEFAULT_HIDDEN_LAYERS: usize = 3;
pub const DEFAULT_HIDDEN_WIDTH: usize = 20;

#[inline]
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Derivative of [`relu`], taken as 1 at `z = 0`.
#[inline]
pub fn relu_grad(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Per-feature standardization `(v - mean) / std` applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl InputNorm {
    pub fn identity(dim: usize) -> Self {
        Self { means: vec![0.0; dim], stds: vec![1.0; dim] }
    }

    /// Mean and population standard deviation of each network input over the
    /// dataset. Constant features get a unit std.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.count() as f64;
        let mut means = vec![0.0; INPUT_DIM];
        for r in &data.records {
            for (m, v) in means.iter_mut().zip(r.input()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; INPUT_DIM];
        for r in &data.records {
            for ((s, v), m) in stds.iter_mut().zip(r.input()).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in stds.iter_mut() {
            let sd = math::sqrt(*s / n);
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Ok(Self { means, stds })
    }
}

/// Fully connected network: ReLU hidden layers, linear scalar output.
///
/// Weights are stored per layer as row-major `out x in` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_norm: InputNorm,
    seed: u64,
}

impl MlpNetwork {
    /// Glorot-uniform weights, zero biases, identity input normalization.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            input_norm: InputNorm::identity(layer_sizes[0]),
            seed,
        })
    }

    /// `[7, width; hidden_layers, 1]` network standardized on `data`.
    pub fn for_dataset(hidden_layers: usize, width: usize, data: &Dataset, seed: u64) -> Result<Self> {
        if hidden_layers == 0 || width == 0 {
            return Err(Error::InvalidNetwork(format!(
                "need at least one hidden layer of positive width, got {hidden_layers} x {width}"
            )));
        }
        let mut sizes = vec![INPUT_DIM];
        sizes.extend(core::iter::repeat_n(width, hidden_layers));
        sizes.push(1);
        let mut net = Self::new(&sizes, seed)?;
        net.input_norm = InputNorm::from_dataset(data)?;
        Ok(net)
    }

    /// Assembles a network from raw parts, checking every shape.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        input_norm: InputNorm,
        seed: u64,
    ) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::InvalidNetwork(format!(
                "expected {layers} weight and bias blocks, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, w) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != w[0] * w[1] || biases[l].len() != w[1] {
                return Err(Error::InvalidNetwork(format!("layer {l} does not match {} -> {}", w[0], w[1])));
            }
        }
        let dim = layer_sizes[0];
        if input_norm.means.len() != dim || input_norm.stds.len() != dim {
            return Err(Error::InvalidNetwork(format!("input normalization must have {dim} entries")));
        }
        if input_norm.stds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidNetwork("input normalization stds must be positive".into()));
        }
        Ok(Self { layer_sizes, weights, biases, input_norm, seed })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Mutable weights and biases of layer `l`; shapes cannot change.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights[l], &mut self.biases[l])
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.input_norm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Output without keeping intermediate values.
    pub fn predict(&self, input: &[f64]) -> f64 {
        let mut cache = ForwardCache::for_network(self);
        self.forward_into(input, &mut cache)
    }

    fn forward_into(&self, input: &[f64], cache: &mut ForwardCache) -> f64 {
        assert_eq!(input.len(), self.input_dim(), "input length must match the first layer");
        let norm = &self.input_norm;
        for (k, slot) in cache.acts[0].iter_mut().enumerate() {
            *slot = (input[k] - norm.means[k]) / norm.stds[k];
        }
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let n_in = self.layer_sizes[l];
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let a_prev = &head[l];
            let out = &mut tail[0];
            let pre = &mut cache.pre[l];
            let w = &self.weights[l];
            for (o, (z, b)) in pre.iter_mut().zip(&self.biases[l]).enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *z = b + row.iter().zip(a_prev.iter()).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < last {
                for (a, z) in out.iter_mut().zip(pre.iter()) {
                    *a = relu(*z);
                }
            } else {
                out.copy_from_slice(pre);
            }
        }
        cache.acts[last + 1][0]
    }

    // Adds d(output)/d(params) * output_grad into `grads` and the input gradient into `grads.input`.
    fn backward_accumulate(&self, cache: &ForwardCache, output_grad: f64, grads: &mut Gradients, ws: &mut Deltas) {
        let last = self.n_layers() - 1;
        ws.cur.clear();
        ws.cur.push(output_grad);
        for l in (0..=last).rev() {
            let n_in = self.layer_sizes[l];
            let a_prev = &cache.acts[l];
            let gw = &mut grads.weights[l];
            for (o, d) in ws.cur.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grads.biases[l][o] += d;
                for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(a_prev) {
                    *g += d * a;
                }
            }
            ws.next.clear();
            ws.next.resize(n_in, 0.0);
            let w = &self.weights[l];
            for (o, d) in ws.cur.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (nx, wi) in ws.next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *nx += wi * d;
                }
            }
            if l > 0 {
                for (nx, z) in ws.next.iter_mut().zip(&cache.pre[l - 1]) {
                    *nx *= relu_grad(*z);
                }
            }
            core::mem::swap(&mut ws.cur, &mut ws.next);
        }
        for ((g, d), s) in grads.input.iter_mut().zip(&ws.cur).zip(&self.input_norm.stds) {
            *g += d / s;
        }
    }

    fn shape_matches(&self, cache: &ForwardCache) -> bool {
        cache.acts.len() == self.layer_sizes.len()
            && cache.pre.len() == self.n_layers()
            && cache.acts.iter().zip(&self.layer_sizes).all(|(a, n)| a.len() == *n)
            && cache.pre.iter().zip(&self.layer_sizes[1..]).all(|(p, n)| p.len() == *n)
    }
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 3 {
        return Err(Error::InvalidNetwork("need input, at least one hidden layer, and output".into()));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidNetwork("layer sizes must be positive".into()));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::InvalidNetwork("output layer must have a single unit".into()));
    }
    Ok(())
}

/// Values recorded by a forward pass: the standardized input, every layer's
/// pre-activation and every layer's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `acts[0]` is the standardized input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    fn for_network(net: &MlpNetwork) -> Self {
        Self {
            acts: net.layer_sizes.iter().map(|n| vec![0.0; *n]).collect(),
            pre: net.layer_sizes[1..].iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    /// Smallest pre-activation magnitude over the hidden layers.
    pub fn min_hidden_preactivation(&self) -> f64 {
        let hidden = self.pre.len() - 1;
        self.pre[..hidden].iter().flatten().fold(f64::INFINITY, |m, z| m.min(math::abs(*z)))
    }
}

/// Gradients of the scalar output (times `output_grad`).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// With respect to the raw (unstandardized) input.
    pub input: Vec<f64>,
}

impl Gradients {
    fn zeros(net: &MlpNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|v| v.fill(0.0));
        self.input.fill(0.0);
    }
}

#[derive(Default)]
struct Deltas {
    cur: Vec<f64>,
    next: Vec<f64>,
}

/// Forward pass.
///
/// # Panics
/// If `input` does not match the first layer.
pub fn forward(net: &MlpNetwork, input: &[f64]) -> (f64, ForwardCache) {
    let mut cache = ForwardCache::for_network(net);
    let y = net.forward_into(input, &mut cache);
    (y, cache)
}

/// Reverse pass for a cache produced by [`forward`] on the same network.
pub fn backward(net: &MlpNetwork, cache: &ForwardCache, output_grad: f64) -> Result<Gradients> {
    if !net.shape_matches(cache) {
        return Err(Error::CacheMismatch);
    }
    let mut grads = Gradients::zeros(net);
    net.backward_accumulate(cache, output_grad, &mut grads, &mut Deltas::default());
    Ok(grads)
}

/// Mini-batch gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Coefficient of `||w||^2` added to the loss (weights only).
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, epochs: 2000, batch_size: 32, seed: 0, l2_penalty: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive"));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be at least 1"));
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(Error::InvalidConfig("l2_penalty must be non-negative"));
        }
        Ok(())
    }
}

/// Trains a copy of `net` on `data`.
///
/// Minimizes the mean squared residual `(net(input) - temperature)^2` over
/// shuffled mini-batches. Returns the trained network and, per epoch, the mean
/// squared residual accumulated over that epoch's batches.
pub fn train(net: &MlpNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<(MlpNetwork, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if net.input_dim() != INPUT_DIM {
        return Err(Error::InvalidNetwork(format!("expected {INPUT_DIM} inputs, got {}", net.input_dim())));
    }
    let mut net = net.clone();
    let inputs: Vec<[f64; INPUT_DIM]> = data.records.iter().map(|r| r.input()).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache = ForwardCache::for_network(&net);
    let mut grads = Gradients::zeros(&net);
    let mut deltas = Deltas::default();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            let scale = 2.0 / batch.len() as f64;
            for &idx in batch {
                let r = net.forward_into(&inputs[idx], &mut cache) - data.records[idx].temperature;
                sq_sum += r * r;
                net.backward_accumulate(&cache, scale * r, &mut grads, &mut deltas);
            }
            let lr = cfg.learning_rate;
            let decay = 2.0 * cfg.l2_penalty;
            for (w, g) in net.weights.iter_mut().zip(&grads.weights) {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= lr * (gi + decay * *wi);
                }
            }
            for (b, g) in net.biases.iter_mut().zip(&grads.biases) {
                for (bi, gi) in b.iter_mut().zip(g) {
                    *bi -= lr * gi;
                }
            }
        }
        history.push(sq_sum / inputs.len() as f64);
    }
    Ok((net, history))
}

/// Network output at `(params, x_j, t_j)` for every probe, in probe order.
pub fn coarse_response(net: &MlpNetwork, params: &HeatParams, probes: &ProbeSet) -> Vec<f64> {
    let mut cache = ForwardCache::for_network(net);
    probes.iter().map(|p| net.forward_into(&network_input(params, p.x, p.t), &mut cache)).collect()
}

/// [`coarse_response`] together with the derivative of every component with
/// respect to the five physical parameters.
pub fn coarse_response_jacobian(
    net: &MlpNetwork,
    params: &HeatParams,
    probes: &ProbeSet,
) -> (Vec<f64>, Vec<[f64; N_PARAMS]>) {
    let mut cache = ForwardCache::for_network(net);
    let mut grads = Gradients::zeros(net);
    let mut deltas = Deltas::default();
    let mut values = Vec::with_capacity(probes.len());
    let mut jac = Vec::with_capacity(probes.len());
    for p in probes.iter() {
        values.push(net.forward_into(&network_input(params, p.x, p.t), &mut cache));
        grads.clear();
        net.backward_accumulate(&cache, 1.0, &mut grads, &mut deltas);
        jac.push(core::array::from_fn(|k| grads.input[k]));
    }
    (values, jac)
}

/// Componentwise `a - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub entries: Vec<f64>,
}

pub fn residual(a: &[f64], b: &[f64]) -> Result<ResidualVector> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(ResidualVector { entries: a.iter().zip(b).map(|(x, y)| x - y).collect() })
}

/// Euclidean norm.
pub fn residual_norm(r: &ResidualVector) -> f64 {
    math::sqrt(r.entries.iter().map(|e| e * e).sum())
}
