//! Minimal feed-forward substrate.
//!
//! A [`DenseNet`] is a fixed stack of dense layers with per-layer ReLU or
//! identity activations and optional inverted dropout on hidden outputs.
//! Gradients are analytic (hand-derived backprop, no autodiff graph), and
//! the optimizer is plain SGD so the whole surface stays checkable with
//! finite differences.

mod checkpoint;

pub use checkpoint::{read_dense_net, write_dense_net};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Forward-pass mode. Dropout only fires in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
struct Layer {
    /// Row-major `(out_dim, in_dim)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

impl Layer {
    fn matvec(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// A fixed-topology multi-layer perceptron.
///
/// `layer_dims` lists the input dimension followed by each layer's output
/// dimension, so `[4, 8, 2]` is a two-layer net mapping R^4 to R^2.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Layer>,
    dims: Vec<usize>,
    dropout_rate: f64,
    /// Bumped on every parameter mutation; forward caches record it so a
    /// backward pass against a mutated net is rejected.
    version: u64,
}

/// Activation record produced by [`DenseNet::forward`] and consumed by
/// [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Pre-activation values per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation (and post-dropout) values per layer.
    post: Vec<Vec<f64>>,
    /// Inverted-dropout masks per hidden layer (empty in eval mode or when
    /// the rate is zero). Entries are either 0 or 1/keep.
    masks: Vec<Option<Vec<f64>>>,
    version: u64,
}

/// Per-parameter gradients, shape-matched to the owning [`DenseNet`].
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub weight_grads: Vec<Vec<f64>>,
    pub bias_grads: Vec<Vec<f64>>,
    /// d(loss)/d(input) of the whole net; lets callers chain gradients into
    /// whatever produced the input (e.g. pooled embeddings).
    pub input_grad: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> Self {
        GradientSet {
            weight_grads: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            bias_grads: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            input_grad: vec![0.0; net.input_dim()],
        }
    }

    /// Accumulate `other` into `self` (shapes must match).
    pub fn accumulate(&mut self, other: &GradientSet) {
        for (a, b) in self.weight_grads.iter_mut().zip(&other.weight_grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.bias_grads.iter_mut().zip(&other.bias_grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.input_grad.iter_mut().zip(&other.input_grad) {
            *x += y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self
            .weight_grads
            .iter_mut()
            .chain(self.bias_grads.iter_mut())
        {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
        for x in self.input_grad.iter_mut() {
            *x *= factor;
        }
    }
}

impl DenseNet {
    /// Zero-initialized net. `activations` must have one entry per layer.
    pub fn new(dims: &[usize], activations: &[Activation], dropout_rate: f64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "a net needs at least an input and an output dimension".into(),
            ));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("layer dims must be positive".into()));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} activations, got {}",
                dims.len() - 1,
                activations.len()
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Layer {
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
                in_dim: w[0],
                out_dim: w[1],
                activation,
            })
            .collect();
        Ok(DenseNet {
            layers,
            dims: dims.to_vec(),
            dropout_rate,
            version: 0,
        })
    }

    /// Randomly initialized net (He-style uniform fan-in scaling).
    pub fn random(
        dims: &[usize],
        activations: &[Activation],
        dropout_rate: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut net = Self::new(dims, activations, dropout_rate)?;
        for layer in &mut net.layers {
            let limit = (6.0 / layer.in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = (rng.uniform() * 2.0 - 1.0) * limit;
            }
        }
        Ok(net)
    }

    /// Single-layer identity map of dimension `dim` (weights = I, bias = 0).
    pub fn identity(dim: usize) -> Self {
        let mut net = Self::new(&[dim, dim], &[Activation::Identity], 0.0)
            .expect("identity net dims are valid");
        for i in 0..dim {
            net.layers[0].weights[i * dim + i] = 1.0;
        }
        net
    }

    /// Two-layer ReLU net initialized to compute (approximately) the
    /// identity: `relu(x) - relu(-x) = x` threaded through paired hidden
    /// units, plus `noise`-scaled jitter. Requires `hidden >= 2 * dim`.
    pub fn near_identity(
        dim: usize,
        hidden: usize,
        noise: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if hidden < 2 * dim {
            return Err(Error::InvalidArgument(format!(
                "near-identity init needs hidden >= 2 * dim, got {hidden} < {}",
                2 * dim
            )));
        }
        let mut net = Self::new(
            &[dim, hidden, dim],
            &[Activation::Relu, Activation::Identity],
            0.0,
        )?;
        for layer in &mut net.layers {
            for w in &mut layer.weights {
                *w = noise * rng.gaussian();
            }
        }
        for i in 0..dim {
            net.layers[0].weights[i * dim + i] += 1.0;
            net.layers[0].weights[(dim + i) * dim + i] += -1.0;
            net.layers[1].weights[i * hidden + i] += 1.0;
            net.layers[1].weights[i * hidden + dim + i] += -1.0;
        }
        net.version = 0;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated non-empty")
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Total parameter count (weights + biases).
    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat parameter read in layer order, weights before biases.
    pub fn param(&self, idx: usize) -> f64 {
        let (layer, offset) = self.locate(idx);
        let l = &self.layers[layer];
        if offset < l.weights.len() {
            l.weights[offset]
        } else {
            l.bias[offset - l.weights.len()]
        }
    }

    /// Flat parameter write; bumps the net version.
    pub fn set_param(&mut self, idx: usize, value: f64) {
        let (layer, offset) = self.locate(idx);
        let l = &mut self.layers[layer];
        if offset < l.weights.len() {
            l.weights[offset] = value;
        } else {
            let off = offset - l.weights.len();
            l.bias[off] = value;
        }
        self.version += 1;
    }

    /// Flat view of a gradient set in the same order as [`DenseNet::param`].
    pub fn flatten_grads(&self, grads: &GradientSet) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (i, _) in self.layers.iter().enumerate() {
            out.extend_from_slice(&grads.weight_grads[i]);
            out.extend_from_slice(&grads.bias_grads[i]);
        }
        out
    }

    fn locate(&self, mut idx: usize) -> (usize, usize) {
        for (i, l) in self.layers.iter().enumerate() {
            let n = l.weights.len() + l.bias.len();
            if idx < n {
                return (i, idx);
            }
            idx -= n;
        }
        panic!("parameter index out of range");
    }

    /// Run the net on `input`.
    ///
    /// Eval mode is a pure function of `(self, input)`. Train mode applies
    /// inverted dropout to hidden-layer outputs using draws from `rng`.
    pub fn forward(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
                context: "forward input",
            });
        }
        let mut cache = ForwardCache {
            input: input.to_vec(),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            version: self.version,
        };
        let mut current = input.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.out_dim);
            layer.matvec(&current, &mut pre);
            let mut post: Vec<f64> = pre.iter().map(|&z| layer.activation.apply(z)).collect();
            let mask = if mode == Mode::Train && self.dropout_rate > 0.0 && i != last {
                let keep = 1.0 - self.dropout_rate;
                let mask: Vec<f64> = post
                    .iter()
                    .map(|_| {
                        if rng.uniform() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (p, m) in post.iter_mut().zip(&mask) {
                    *p *= m;
                }
                Some(mask)
            } else {
                None
            };
            cache.pre.push(pre);
            cache.masks.push(mask);
            current = post.clone();
            cache.post.push(post);
        }
        Ok((current, cache))
    }

    /// Eval-mode forward without keeping the cache.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut rng = RngStream::new(0);
        Ok(self.forward(input, Mode::Eval, &mut rng)?.0)
    }

    /// Backpropagate `output_grad` (d loss / d output) through the cached
    /// forward pass, returning d loss / d params and d loss / d input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<GradientSet> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.len(),
                context: "backward output_grad",
            });
        }
        let mut grads = GradientSet::zeros_like(self);
        let mut delta = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            // Through dropout, then the activation.
            if let Some(mask) = &cache.masks[i] {
                for (d, m) in delta.iter_mut().zip(mask) {
                    *d *= m;
                }
            }
            for (d, &z) in delta.iter_mut().zip(&cache.pre[i]) {
                *d *= layer.activation.derivative(z);
            }
            let layer_input: &[f64] = if i == 0 {
                &cache.input
            } else {
                &cache.post[i - 1]
            };
            let wg = &mut grads.weight_grads[i];
            for (o, &d) in delta.iter().enumerate() {
                grads.bias_grads[i][o] = d;
                let row = &mut wg[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &x) in row.iter_mut().zip(layer_input) {
                    *g = d * x;
                }
            }
            // d loss / d layer_input for the next step down.
            let mut prev = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            delta = prev;
        }
        grads.input_grad = delta;
        Ok(grads)
    }

    /// One plain-SGD step: `params -= lr * grads`.
    pub fn optimizer_step(&mut self, grads: &GradientSet, lr: f64) -> Result<()> {
        if grads.weight_grads.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                got: grads.weight_grads.len(),
                context: "optimizer_step layer count",
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if grads.weight_grads[i].len() != layer.weights.len()
                || grads.bias_grads[i].len() != layer.bias.len()
            {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.len(),
                    got: grads.weight_grads[i].len(),
                    context: "optimizer_step layer shape",
                });
            }
            for (j, g) in grads.weight_grads[i]
                .iter()
                .chain(&grads.bias_grads[i])
                .enumerate()
            {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "gradient at layer {i}, flat index {j} (value {g})"
                    )));
                }
            }
        }
        for (layer, (wg, bg)) in self
            .layers
            .iter_mut()
            .zip(grads.weight_grads.iter().zip(&grads.bias_grads))
        {
            for (w, g) in layer.weights.iter_mut().zip(wg) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(bg) {
                *b -= lr * g;
            }
        }
        self.version += 1;
        Ok(())
    }
}

/// Numerically stabilized softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("softmax logits"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `ln(sum(exp(logits)))` with max subtraction.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval_rng() -> RngStream {
        RngStream::new(0)
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let net = DenseNet::identity(2);
        let (out, _) = net
            .forward(&[1.0, 2.0], Mode::Eval, &mut eval_rng())
            .unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let mut net = DenseNet::new(&[2, 2], &[Activation::Relu], 0.0).unwrap();
        // Weights = I so pre-activation equals the input.
        net.set_param(0, 1.0);
        net.set_param(3, 1.0);
        let (out, _) = net
            .forward(&[-1.0, 3.0], Mode::Eval, &mut eval_rng())
            .unwrap();
        assert_eq!(out, vec![0.0, 3.0]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let mut rng = RngStream::new(11);
        let net = DenseNet::random(
            &[3, 4, 2],
            &[Activation::Relu, Activation::Identity],
            0.0,
            &mut rng,
        )
        .unwrap();
        let x = [0.3, -0.7, 1.1];
        let (out, _) = net.forward(&x, Mode::Eval, &mut eval_rng()).unwrap();

        // Independent straight-line recomputation from flat params.
        let mut h = [0.0f64; 4];
        for o in 0..4 {
            let mut acc = net.param(12 + o); // bias of layer 0
            for i in 0..3 {
                acc += net.param(o * 3 + i) * x[i];
            }
            h[o] = acc.max(0.0);
        }
        let base = 16; // layer 0 owns 12 weights + 4 biases
        for o in 0..2 {
            let mut acc = net.param(base + 8 + o);
            for i in 0..4 {
                acc += net.param(base + o * 4 + i) * h[i];
            }
            assert_relative_eq!(out[o], acc, max_relative = 1e-12);
        }
    }

    #[test]
    fn input_dim_mismatch_is_rejected() {
        let net = DenseNet::identity(2);
        assert!(matches!(
            net.forward(&[1.0], Mode::Eval, &mut eval_rng()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = RngStream::new(1);
        let net = DenseNet::random(&[3, 3], &[Activation::Identity], 0.0, &mut rng).unwrap();
        let (_, cache) = net
            .forward(&[1.0, 2.0, 3.0], Mode::Eval, &mut eval_rng())
            .unwrap();
        let grads = net.backward(&cache, &[0.0, 0.0, 0.0]).unwrap();
        assert!(net.flatten_grads(&grads).iter().all(|&g| g == 0.0));
        assert!(grads.input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        // y = w * x with w = 5, x = 2; dL/dy = 1 so dL/dw = x = 2.
        let mut net = DenseNet::new(&[1, 1], &[Activation::Identity], 0.0).unwrap();
        net.set_param(0, 5.0);
        let (_, cache) = net.forward(&[2.0], Mode::Eval, &mut eval_rng()).unwrap();
        let grads = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(grads.weight_grads[0][0], 2.0);
        assert_eq!(grads.bias_grads[0][0], 1.0);
        assert_eq!(grads.input_grad[0], 5.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = DenseNet::identity(2);
        let (_, cache) = net
            .forward(&[1.0, 1.0], Mode::Eval, &mut eval_rng())
            .unwrap();
        net.set_param(0, 2.0);
        assert!(matches!(
            net.backward(&cache, &[1.0, 1.0]),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // Loss = 0.5 * ||f(x)||^2, so output_grad = f(x).
        for seed in 0..10u64 {
            let mut rng = RngStream::new(100 + seed);
            let net = DenseNet::random(
                &[4, 6, 3],
                &[Activation::Relu, Activation::Identity],
                0.0,
                &mut rng,
            )
            .unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.uniform() * 2.0 - 1.0).collect();
            let (out, cache) = net.forward(&x, Mode::Eval, &mut eval_rng()).unwrap();
            let grads = net.backward(&cache, &out).unwrap();
            let flat = net.flatten_grads(&grads);

            let loss = |n: &DenseNet| -> f64 {
                let y = n.infer(&x).unwrap();
                0.5 * y.iter().map(|v| v * v).sum::<f64>()
            };
            let h = 1e-5;
            for idx in 0..net.num_params() {
                let orig = net.param(idx);
                let mut plus = net.clone();
                plus.set_param(idx, orig + h);
                let mut minus = net.clone();
                minus.set_param(idx, orig - h);
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let denom = fd.abs().max(flat[idx].abs()).max(1e-6);
                assert!(
                    (fd - flat[idx]).abs() / denom <= 1e-4,
                    "seed {seed} param {idx}: analytic {} vs fd {fd}",
                    flat[idx]
                );
            }
        }
    }

    #[test]
    fn dropout_train_mode_is_seed_deterministic_and_eval_is_pure() {
        let mut rng = RngStream::new(5);
        let net = DenseNet::random(
            &[3, 8, 2],
            &[Activation::Relu, Activation::Identity],
            0.4,
            &mut rng,
        )
        .unwrap();
        let x = [1.0, -0.5, 0.25];
        let (a, _) = net
            .forward(&x, Mode::Train, &mut RngStream::new(77))
            .unwrap();
        let (b, _) = net
            .forward(&x, Mode::Train, &mut RngStream::new(77))
            .unwrap();
        assert_eq!(a, b);
        let (e1, _) = net.forward(&x, Mode::Eval, &mut RngStream::new(1)).unwrap();
        let (e2, _) = net.forward(&x, Mode::Eval, &mut RngStream::new(2)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn dropout_gradients_check_against_finite_differences() {
        // With a frozen mask (same rng seed replayed) the train-mode net is
        // still a deterministic function of its parameters.
        let mut rng = RngStream::new(6);
        let net = DenseNet::random(
            &[3, 6, 2],
            &[Activation::Relu, Activation::Identity],
            0.3,
            &mut rng,
        )
        .unwrap();
        let x = [0.4, 0.9, -1.2];
        let mask_seed = 123;
        let (out, cache) = net
            .forward(&x, Mode::Train, &mut RngStream::new(mask_seed))
            .unwrap();
        let grads = net.backward(&cache, &out).unwrap();
        let flat = net.flatten_grads(&grads);
        let loss = |n: &DenseNet| -> f64 {
            let (y, _) = n
                .forward(&x, Mode::Train, &mut RngStream::new(mask_seed))
                .unwrap();
            0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };
        let h = 1e-5;
        for idx in 0..net.num_params() {
            let orig = net.param(idx);
            let mut plus = net.clone();
            plus.set_param(idx, orig + h);
            let mut minus = net.clone();
            minus.set_param(idx, orig - h);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = fd.abs().max(flat[idx].abs()).max(1e-6);
            assert!((fd - flat[idx]).abs() / denom <= 1e-4);
        }
    }

    #[test]
    fn softmax_trivial_cases() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[1.0f64.ln(), 3.0f64.ln()]).unwrap();
        assert_relative_eq!(p[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(p[1], 0.75, max_relative = 1e-12);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn optimizer_step_arithmetic() {
        let mut net = DenseNet::new(&[1, 1], &[Activation::Identity], 0.0).unwrap();
        net.set_param(0, 1.0);
        let mut grads = GradientSet::zeros_like(&net);
        grads.weight_grads[0][0] = 2.0;
        net.optimizer_step(&grads, 0.1).unwrap();
        assert_relative_eq!(net.param(0), 0.8);

        // lr = 0 leaves the net unchanged.
        let before: Vec<f64> = (0..net.num_params()).map(|i| net.param(i)).collect();
        net.optimizer_step(&grads, 0.0).unwrap();
        let after: Vec<f64> = (0..net.num_params()).map(|i| net.param(i)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn optimizer_rejects_non_finite_gradients() {
        let mut net = DenseNet::identity(1);
        let mut grads = GradientSet::zeros_like(&net);
        grads.weight_grads[0][0] = f64::NAN;
        let err = net.optimizer_step(&grads, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn sgd_descends_a_convex_quadratic_monotonically() {
        // Loss = 0.5 * (w*x - t)^2 over a fixed batch; closed-form convex.
        let mut net = DenseNet::new(&[1, 1], &[Activation::Identity], 0.0).unwrap();
        net.set_param(0, 3.0);
        let data = [(1.0, 0.5), (2.0, 1.0), (0.5, 0.25)];
        let loss_of = |net: &DenseNet| -> f64 {
            data.iter()
                .map(|&(x, t)| {
                    let y = net.infer(&[x]).unwrap()[0];
                    0.5 * (y - t) * (y - t)
                })
                .sum()
        };
        let mut last = loss_of(&net);
        for _ in 0..200 {
            let mut total = GradientSet::zeros_like(&net);
            for &(x, t) in &data {
                let (y, cache) = net.forward(&[x], Mode::Eval, &mut eval_rng()).unwrap();
                let g = net.backward(&cache, &[y[0] - t]).unwrap();
                total.accumulate(&g);
            }
            net.optimizer_step(&total, 0.2).unwrap();
            let now = loss_of(&net);
            assert!(now <= last + 1e-15, "loss rose: {last} -> {now}");
            last = now;
        }
        assert!(last < 1e-6);
    }
}
