use super::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2_backward,
    maxpool2_forward, relu_in_place, softmax_xent, KERNEL,
};
use super::tensor::{Scalar, Tensor4};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

pub const NUM_CONV: usize = 3;
pub const NUM_DENSE: usize = 5;
pub const NUM_CLASSES: usize = 3;

/// Layer widths. The architecture itself is fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Square input side in pixels.
    pub input_size: usize,
    pub conv_channels: [usize; NUM_CONV],
    /// Strictly decreasing, ending in 3 logits.
    pub dense_units: [usize; NUM_DENSE],
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            conv_channels: [16, 32, 64],
            dense_units: [256, 128, 64, 32, 3],
            seed: 0,
        }
    }
}

/// `(conv output side, pooled side)` for each conv block.
pub fn spatial_sizes(input_size: usize) -> Result<[(usize, usize); NUM_CONV]> {
    let mut side = input_size;
    let mut out = [(0, 0); NUM_CONV];
    for (i, slot) in out.iter_mut().enumerate() {
        if side < KERNEL {
            return Err(Error::Shape(format!(
                "input {input_size}x{input_size} shrinks to {side} before conv {}",
                i + 1
            )));
        }
        let conv = side - (KERNEL - 1);
        if conv < 2 {
            return Err(Error::Shape(format!(
                "input {input_size}x{input_size} leaves {conv}x{conv} before pool {}",
                i + 1
            )));
        }
        side = conv / 2;
        *slot = (conv, side);
    }
    Ok(out)
}

impl ModelConfig {
    /// Smallest input that survives three valid conv + pool stages.
    pub const MIN_INPUT: usize = 22;

    /// Small network used for gradient checks.
    pub fn tiny() -> Self {
        Self {
            input_size: Self::MIN_INPUT,
            conv_channels: [2, 3, 4],
            dense_units: [16, 12, 8, 4, 3],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.contains(&0) {
            return Err(Error::Argument("conv channel counts must be positive".into()));
        }
        if self.dense_units[NUM_DENSE - 1] != NUM_CLASSES {
            return Err(Error::Argument(format!(
                "last dense layer must have {NUM_CLASSES} units, got {}",
                self.dense_units[NUM_DENSE - 1]
            )));
        }
        if self.dense_units.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument(format!(
                "dense units must strictly decrease, got {:?}",
                self.dense_units
            )));
        }
        spatial_sizes(self.input_size)?;
        Ok(())
    }

    /// Side of the last pooled feature map.
    pub fn final_side(&self) -> Result<usize> {
        Ok(spatial_sizes(self.input_size)?[NUM_CONV - 1].1)
    }

    /// Side of the last conv activation (the Grad-CAM layer).
    pub fn last_conv_side(&self) -> Result<usize> {
        Ok(spatial_sizes(self.input_size)?[NUM_CONV - 1].0)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let side = self.final_side()?;
        Ok(side * side * self.conv_channels[NUM_CONV - 1])
    }

    /// Tensor lengths in declaration order: conv1 weight, conv1 bias, ...,
    /// dense5 weight, dense5 bias.
    pub fn param_shapes(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let mut shapes = Vec::with_capacity(2 * (NUM_CONV + NUM_DENSE));
        let mut c_in = 1;
        for &c in &self.conv_channels {
            shapes.push(KERNEL * KERNEL * c_in * c);
            shapes.push(c);
            c_in = c;
        }
        let mut n_in = self.flatten_len()?;
        for &u in &self.dense_units {
            shapes.push(n_in * u);
            shapes.push(u);
            n_in = u;
        }
        Ok(shapes)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.param_shapes()?.iter().sum())
    }

    fn fans(&self) -> Result<Vec<(usize, usize)>> {
        let mut fans = Vec::new();
        let mut c_in = 1;
        for &c in &self.conv_channels {
            fans.push((KERNEL * KERNEL * c_in, KERNEL * KERNEL * c));
            c_in = c;
        }
        let mut n_in = self.flatten_len()?;
        for &u in &self.dense_units {
            fans.push((n_in, u));
            n_in = u;
        }
        Ok(fans)
    }
}

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Trainable tensors in declaration order (see [`ModelConfig::param_shapes`]).
///
/// Every mutable borrow re-stamps the parameters, which invalidates forward
/// caches taken before the change.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    config: ModelConfig,
    tensors: Vec<Vec<T>>,
    stamp: u64,
}

impl<T: PartialEq> PartialEq for ModelParams<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors == other.tensors
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        let tensors = config
            .param_shapes()?
            .into_iter()
            .map(|n| vec![T::zero(); n])
            .collect();
        Ok(Self {
            config: config.clone(),
            tensors,
            stamp: fresh_stamp(),
        })
    }

    /// Glorot-uniform weights, zero biases, seeded from `config.seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let mut rng = seeded(derive_seed(config.seed, stream::WEIGHT_INIT, 0));
        for (layer, (fan_in, fan_out)) in config.fans()?.into_iter().enumerate() {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in params.tensors[2 * layer].iter_mut() {
                *w = T::from_f64(rng.gen_range(-limit..limit));
            }
        }
        Ok(params)
    }

    /// Rebuild from raw tensors, checking every length against the config.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Vec<T>>) -> Result<Self> {
        let shapes = config.param_shapes()?;
        if tensors.len() != shapes.len() || tensors.iter().zip(&shapes).any(|(t, &n)| t.len() != n) {
            return Err(Error::Shape("parameter tensors do not match the model config".into()));
        }
        Ok(Self {
            config: config.clone(),
            tensors,
            stamp: fresh_stamp(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            tensors: self.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect(),
            stamp: fresh_stamp(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.iter().map(|&v| U::from_f64(v.to_f64())).collect())
                .collect(),
            stamp: fresh_stamp(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Vec<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Vec<T>] {
        self.stamp = fresh_stamp();
        &mut self.tensors
    }

    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn conv_weight(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer]
    }

    pub fn conv_bias(&self, layer: usize) -> &[T] {
        &self.tensors[2 * layer + 1]
    }

    pub fn dense_weight(&self, layer: usize) -> &[T] {
        &self.tensors[2 * (NUM_CONV + layer)]
    }

    pub fn dense_bias(&self, layer: usize) -> &[T] {
        &self.tensors[2 * (NUM_CONV + layer) + 1]
    }

    pub fn dense_weight_mut(&mut self, layer: usize) -> &mut [T] {
        &mut self.tensors_mut()[2 * (NUM_CONV + layer)]
    }

    pub fn dense_bias_mut(&mut self, layer: usize) -> &mut [T] {
        &mut self.tensors_mut()[2 * (NUM_CONV + layer) + 1]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }
}

/// Everything backward and Grad-CAM need from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    stamp: u64,
    batch: usize,
    conv_in: Vec<Tensor4<T>>,
    /// Post-ReLU conv outputs.
    conv_out: Vec<Tensor4<T>>,
    pool_arg: Vec<Vec<u32>>,
    /// Flattened last pooled map, `batch x flatten_len`.
    flat: Vec<T>,
    /// Post-activation dense outputs; the last entry holds the logits.
    dense_out: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// `batch x 3` logits.
    pub fn logits(&self) -> &[T] {
        &self.dense_out[NUM_DENSE - 1]
    }

    /// Post-ReLU activation of the last conv layer.
    pub fn last_conv(&self) -> &Tensor4<T> {
        &self.conv_out[NUM_CONV - 1]
    }
}

/// Forward pass over a `(batch, s, s, 1)` input.
pub fn model_forward<T: Scalar>(params: &ModelParams<T>, x: &Tensor4<T>) -> Result<(Vec<T>, ForwardCache<T>)> {
    let cfg = &params.config;
    let [n, h, w, c] = x.dims();
    if h != cfg.input_size || w != cfg.input_size || c != 1 {
        return Err(Error::Shape(format!(
            "model expects (n, {0}, {0}, 1) input, got {1:?}",
            cfg.input_size,
            x.dims()
        )));
    }
    let mut conv_in = Vec::with_capacity(NUM_CONV);
    let mut conv_out = Vec::with_capacity(NUM_CONV);
    let mut pool_arg = Vec::with_capacity(NUM_CONV);
    let mut cur = x.clone();
    for l in 0..NUM_CONV {
        let mut y = conv2d_forward(&cur, params.conv_weight(l), params.conv_bias(l))?;
        relu_in_place(y.data_mut());
        let (pooled, arg) = maxpool2_forward(&y)?;
        conv_in.push(cur);
        conv_out.push(y);
        pool_arg.push(arg);
        cur = pooled;
    }
    let flat = cur.into_data();
    let mut dense_out: Vec<Vec<T>> = Vec::with_capacity(NUM_DENSE);
    for l in 0..NUM_DENSE {
        let input = if l == 0 { &flat } else { &dense_out[l - 1] };
        let n_in = input.len() / n;
        let mut out = Vec::with_capacity(n * cfg.dense_units[l]);
        for s in input.chunks_exact(n_in) {
            out.extend(dense_forward(s, params.dense_weight(l), params.dense_bias(l))?);
        }
        if l + 1 < NUM_DENSE {
            relu_in_place(&mut out);
        }
        dense_out.push(out);
    }
    let logits = dense_out[NUM_DENSE - 1].clone();
    Ok((
        logits,
        ForwardCache {
            stamp: params.stamp,
            batch: n,
            conv_in,
            conv_out,
            pool_arg,
            flat,
            dense_out,
        },
    ))
}

fn check_cache<T: Scalar>(params: &ModelParams<T>, cache: &ForwardCache<T>, grad_logits: &[T]) -> Result<()> {
    if cache.stamp != params.stamp {
        return Err(Error::Contract("forward cache is stale for these parameters".into()));
    }
    if grad_logits.len() != cache.batch * NUM_CLASSES {
        return Err(Error::Shape(format!(
            "logit gradient has {} values, batch needs {}",
            grad_logits.len(),
            cache.batch * NUM_CLASSES
        )));
    }
    Ok(())
}

/// Back through the dense stack and the last pool; returns the gradient
/// w.r.t. the last post-ReLU conv activation.
fn backward_head<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: &[T],
    mut grads: Option<&mut ModelParams<T>>,
) -> Result<Tensor4<T>> {
    let n = cache.batch;
    let mut g = grad_logits.to_vec();
    for l in (0..NUM_DENSE).rev() {
        if l + 1 < NUM_DENSE {
            for (gv, &out) in g.iter_mut().zip(&cache.dense_out[l]) {
                if out <= T::zero() {
                    *gv = T::zero();
                }
            }
        }
        let input = if l == 0 { &cache.flat } else { &cache.dense_out[l - 1] };
        let n_in = input.len() / n;
        let n_out = g.len() / n;
        let weight = params.dense_weight(l);
        let mut scratch_w;
        let mut scratch_b;
        let (gw, gb): (&mut [T], &mut [T]) = match grads.as_deref_mut() {
            Some(gr) => {
                let idx = 2 * (NUM_CONV + l);
                let (a, b) = gr.tensors.split_at_mut(idx + 1);
                (&mut a[idx], &mut b[0])
            }
            None => {
                scratch_w = vec![T::zero(); weight.len()];
                scratch_b = vec![T::zero(); n_out];
                (&mut scratch_w, &mut scratch_b)
            }
        };
        let mut gx = Vec::with_capacity(n * n_in);
        for (xs, gs) in input.chunks_exact(n_in).zip(g.chunks_exact(n_out)) {
            gx.extend(dense_backward(xs, weight, gs, gw, gb));
        }
        g = gx;
    }
    let last = &cache.conv_out[NUM_CONV - 1];
    let [_, ch, cw, cc] = last.dims();
    let pooled = Tensor4::new([n, ch / 2, cw / 2, cc], g)?;
    maxpool2_backward(&pooled, &cache.pool_arg[NUM_CONV - 1], last.dims())
}

/// Gradient of `sum(grad_logits * logits)` w.r.t. the last conv activation.
pub(crate) fn grad_last_conv<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: &[T],
) -> Result<Tensor4<T>> {
    check_cache(params, cache, grad_logits)?;
    backward_head(params, cache, grad_logits, None)
}

/// Exact reverse-mode gradients of `sum(grad_logits * logits)` w.r.t.
/// every parameter. Batch averaging is the caller's job.
pub fn model_backward<T: Scalar>(
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: &[T],
) -> Result<ModelParams<T>> {
    check_cache(params, cache, grad_logits)?;
    let mut grads = params.zeros_like();
    let mut g = backward_head(params, cache, grad_logits, Some(&mut grads))?;
    for l in (0..NUM_CONV).rev() {
        for (gv, &out) in g.data_mut().iter_mut().zip(cache.conv_out[l].data()) {
            if out <= T::zero() {
                *gv = T::zero();
            }
        }
        let cg = conv2d_backward(&cache.conv_in[l], params.conv_weight(l), &g, l > 0)?;
        grads.tensors[2 * l] = cg.weight;
        grads.tensors[2 * l + 1] = cg.bias;
        if let Some(gx) = cg.input {
            g = maxpool2_backward(&gx, &cache.pool_arg[l - 1], cache.conv_out[l - 1].dims())?;
        }
    }
    Ok(grads)
}

/// Mean cross-entropy over the batch, the matching logit gradient (already
/// divided by the batch size) and the number of correct argmax predictions.
pub fn batch_loss<T: Scalar>(logits: &[T], labels: &[usize]) -> Result<(T, Vec<T>, usize)> {
    if logits.len() != labels.len() * NUM_CLASSES || labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} logits for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let n = T::from_f64(labels.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    let mut correct = 0;
    for (row, &label) in logits.chunks_exact(NUM_CLASSES).zip(labels) {
        let (loss, g) = softmax_xent(row, label)?;
        total = total + loss;
        grad.extend(g.into_iter().map(|v| v / n));
        if argmax(row) == label {
            correct += 1;
        }
    }
    Ok((total / n, grad, correct))
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
