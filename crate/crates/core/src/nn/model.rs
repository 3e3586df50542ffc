//! Dense classifier with independent categorical output heads.
//!
//! Hidden layers apply affine → batch norm → ReLU. The output layer is a
//! plain affine map whose logits are split into heads: softmax groups for
//! clustering or one sigmoid logit per bit for hashing. A sigmoid head is
//! reported as a two-column distribution `[1 - p, p]` so that every head
//! looks like a categorical distribution to the objectives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layer::{BatchNorm, DenseLayer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How output logits are grouped into heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadLayout {
    /// One softmax group per entry, with that many categories.
    Softmax(Vec<usize>),
    /// `bits` independent sigmoid outputs.
    Sigmoid(usize),
}

impl HeadLayout {
    pub fn logits(&self) -> usize {
        match self {
            HeadLayout::Softmax(sizes) => sizes.iter().sum(),
            HeadLayout::Sigmoid(bits) => *bits,
        }
    }

    pub fn num_heads(&self) -> usize {
        match self {
            HeadLayout::Softmax(sizes) => sizes.len(),
            HeadLayout::Sigmoid(bits) => *bits,
        }
    }

    /// Categories per head (2 for sigmoid heads).
    pub fn head_sizes(&self) -> Vec<usize> {
        match self {
            HeadLayout::Softmax(sizes) => sizes.clone(),
            HeadLayout::Sigmoid(bits) => vec![2; *bits],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            HeadLayout::Softmax(sizes) if sizes.is_empty() || sizes.contains(&0) => Err(
                Error::InvalidConfig(format!("softmax head sizes must be positive, got {sizes:?}")),
            ),
            HeadLayout::Sigmoid(0) => Err(Error::InvalidConfig("need at least one sigmoid bit".into())),
            _ => Ok(()),
        }
    }
}

/// Normalization behaviour of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with the running statistics.
    Infer,
}

/// Default init scales: 0.1 for every hidden matrix, 1e-4 for the output.
pub fn default_scales(num_weight_matrices: usize) -> Vec<f64> {
    let mut s = vec![0.1; num_weight_matrices.saturating_sub(1)];
    s.push(1e-4);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    layers: Vec<DenseLayer>,
    heads: HeadLayout,
    /// Bumped on every parameter mutation; caches record it to detect staleness.
    #[serde(skip)]
    version: u64,
}

/// Single-softmax-head classifier over `layer_dims = [d, h1, ..., K]`.
pub fn init_params(layer_dims: &[usize], scales: &[f64], seed: u64) -> Result<MlpClassifier> {
    let k = *layer_dims
        .last()
        .ok_or_else(|| Error::InvalidConfig("layer_dims is empty".into()))?;
    MlpClassifier::new(layer_dims, HeadLayout::Softmax(vec![k]), scales, seed)
}

impl MlpClassifier {
    /// Builds a network with weights drawn from `N(0, (scale·sqrt(2/fan_in))²)`,
    /// zero biases, `gamma = 1` and `beta = 0`.
    ///
    /// `layer_dims` lists the input width, the hidden widths and finally the
    /// number of output logits, which must match `heads`.
    pub fn new(layer_dims: &[usize], heads: HeadLayout, scales: &[f64], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least input and output dims, got {layer_dims:?}"
            )));
        }
        if layer_dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("dims must be positive, got {layer_dims:?}")));
        }
        let n_weights = layer_dims.len() - 1;
        if scales.len() != n_weights {
            return Err(Error::InvalidConfig(format!(
                "{n_weights} weight matrices but {} scales",
                scales.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidConfig(format!("init scale must be finite and >= 0, got {s}")));
        }
        heads.validate()?;
        if heads.logits() != layer_dims[n_weights] {
            return Err(Error::InvalidConfig(format!(
                "output dim {} does not match {} head logits",
                layer_dims[n_weights],
                heads.logits()
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(n_weights);
        for (i, pair) in layer_dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = scales[i] * (2.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("std is positive and finite");
                (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect()
            } else {
                vec![0.0; fan_in * fan_out]
            };
            let hidden = i + 1 < n_weights;
            layers.push(DenseLayer {
                weight: Matrix::from_raw(fan_in, fan_out, data),
                bias: vec![0.0; fan_out],
                bn: hidden.then(|| BatchNorm::new(fan_out)),
            });
        }
        Ok(Self {
            layers,
            heads,
            version: 0,
        })
    }

    pub(crate) fn from_parts(layers: Vec<DenseLayer>, heads: HeadLayout) -> Result<Self> {
        heads.validate()?;
        let last = layers
            .last()
            .ok_or_else(|| Error::InvalidConfig("model has no layers".into()))?;
        if last.fan_out() != heads.logits() || last.bn.is_some() {
            return Err(Error::InvalidConfig("output layer does not match head layout".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::InvalidConfig(format!("layer {i} output does not feed layer {}", i + 1)));
            }
            if pair[0].bn.is_none() {
                return Err(Error::InvalidConfig(format!("hidden layer {i} lacks batch norm")));
            }
        }
        Ok(Self {
            layers,
            heads,
            version: 0,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Direct parameter access. Any cache taken before this call becomes stale.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn heads(&self) -> &HeadLayout {
        &self.heads
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(DenseLayer::fan_out).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    /// Forward pass that never touches model state.
    ///
    /// Returns per-head probabilities and the cache needed by [`backward`](Self::backward).
    /// In [`Mode::Train`] the cache also carries the batch statistics, which
    /// [`commit_batch_stats`](Self::commit_batch_stats) folds into the running averages.
    pub fn forward(&self, x: &Matrix, mode: Mode) -> Result<ForwardPass> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::Shape("empty input batch".into()));
        }
        let n = x.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut act = x.clone();
        for layer in &self.layers {
            let input = act;
            let mut z = layer.affine(&input);
            let norm = match &layer.bn {
                None => None,
                Some(bn) => {
                    let units = bn.units();
                    let (mean, var) = match mode {
                        Mode::Train => batch_moments(&z),
                        Mode::Infer => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();
                    let mut x_hat = Matrix::zeros(n, units);
                    for r in 0..n {
                        let zr = z.row_mut(r);
                        let hr = x_hat.row_mut(r);
                        for u in 0..units {
                            hr[u] = (zr[u] - mean[u]) * inv_std[u];
                            // y = γ·x̂ + β, then ReLU (subgradient 0 at 0).
                            zr[u] = (bn.gamma[u] * hr[u] + bn.beta[u]).max(0.0);
                        }
                    }
                    Some(NormCache {
                        x_hat,
                        inv_std,
                        mean,
                        var,
                    })
                }
            };
            caches.push(LayerCache { input, norm });
            act = z;
        }
        // `act` now holds the output logits.
        let heads = self.activate_heads(&act);
        Ok(ForwardPass {
            heads,
            cache: Cache {
                mode,
                version: self.version,
                batch: n,
                layers: caches,
            },
        })
    }

    /// Inference-mode probabilities.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        Ok(self.forward(x, Mode::Infer)?.heads)
    }

    /// Train-mode forward that also updates the running statistics.
    pub fn forward_train(&mut self, x: &Matrix) -> Result<ForwardPass> {
        let pass = self.forward(x, Mode::Train)?;
        self.commit_batch_stats(&pass.cache)?;
        Ok(pass)
    }

    pub fn commit_batch_stats(&mut self, cache: &Cache) -> Result<()> {
        self.check_cache(cache)?;
        if cache.mode != Mode::Train {
            return Err(Error::InvalidState("only train-mode passes carry batch statistics".into()));
        }
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(nc)) = (layer.bn.as_mut(), lc.norm.as_ref()) {
                bn.update_running(&nc.mean, &nc.var, cache.batch);
            }
        }
        Ok(())
    }

    fn activate_heads(&self, logits: &Matrix) -> Vec<Matrix> {
        let n = logits.rows();
        match &self.heads {
            HeadLayout::Softmax(sizes) => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(sizes.len());
                for &k in sizes {
                    let mut p = Matrix::zeros(n, k);
                    for r in 0..n {
                        let z = &logits.row(r)[offset..offset + k];
                        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let pr = p.row_mut(r);
                        let mut sum = 0.0;
                        for (o, &zi) in pr.iter_mut().zip(z) {
                            *o = (zi - max).exp();
                            sum += *o;
                        }
                        pr.iter_mut().for_each(|o| *o /= sum);
                    }
                    offset += k;
                    out.push(p);
                }
                out
            }
            HeadLayout::Sigmoid(bits) => (0..*bits)
                .map(|b| {
                    let mut p = Matrix::zeros(n, 2);
                    for r in 0..n {
                        let s = sigmoid(logits.get(r, b));
                        p.set(r, 0, 1.0 - s);
                        p.set(r, 1, s);
                    }
                    p
                })
                .collect(),
        }
    }

    fn check_cache(&self, cache: &Cache) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::InvalidState(format!(
                "cache taken at parameter version {} but model is at {}",
                cache.version, self.version
            )));
        }
        if cache.layers.len() != self.layers.len() {
            return Err(Error::InvalidState("cache does not match model depth".into()));
        }
        Ok(())
    }

    /// Exact reverse-mode gradients of a scalar loss.
    ///
    /// `loss_grad[m]` is the derivative of the loss with respect to head `m`'s
    /// probabilities (same shape as the forward output). Returns gradients for
    /// every parameter and for the input batch.
    pub fn backward(&self, cache: &Cache, loss_grad: &[Matrix]) -> Result<Gradients> {
        self.check_cache(cache)?;
        let n = cache.batch;
        let sizes = self.heads.head_sizes();
        if loss_grad.len() != sizes.len() {
            return Err(Error::Shape(format!(
                "{} head gradients for {} heads",
                loss_grad.len(),
                sizes.len()
            )));
        }
        for (g, &k) in loss_grad.iter().zip(&sizes) {
            if g.shape() != (n, k) {
                return Err(Error::Shape(format!(
                    "head gradient {}x{}, expected {n}x{k}",
                    g.rows(),
                    g.cols()
                )));
            }
        }

        // Recompute head probabilities from the cached output-layer input.
        let last = self.layers.len() - 1;
        let logits = self.layers[last].affine(&cache.layers[last].input);
        let probs = self.activate_heads(&logits);
        let mut dz = Matrix::zeros(n, self.heads.logits());
        match &self.heads {
            HeadLayout::Softmax(_) => {
                let mut offset = 0;
                for (p, g) in probs.iter().zip(loss_grad) {
                    let k = p.cols();
                    for r in 0..n {
                        let pr = p.row(r);
                        let gr = g.row(r);
                        let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        let out = &mut dz.row_mut(r)[offset..offset + k];
                        for j in 0..k {
                            out[j] = pr[j] * (gr[j] - dot);
                        }
                    }
                    offset += k;
                }
            }
            HeadLayout::Sigmoid(_) => {
                for (b, g) in loss_grad.iter().enumerate() {
                    for r in 0..n {
                        let s = probs[b].get(r, 1);
                        dz.set(r, b, (g.get(r, 1) - g.get(r, 0)) * s * (1.0 - s));
                    }
                }
            }
        }

        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());
        let mut upstream = dz;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[i];
            let (dz, bn_grads) = match (&layer.bn, &lc.norm) {
                (None, _) => (upstream, None),
                (Some(bn), Some(nc)) => {
                    let units = bn.units();
                    // Through ReLU: active iff γ·x̂ + β > 0.
                    let mut dy = upstream;
                    for r in 0..n {
                        let hr = nc.x_hat.row(r);
                        for (u, d) in dy.row_mut(r).iter_mut().enumerate() {
                            if bn.gamma[u] * hr[u] + bn.beta[u] <= 0.0 {
                                *d = 0.0;
                            }
                        }
                    }
                    let mut dgamma = vec![0.0; units];
                    let mut dbeta = vec![0.0; units];
                    for r in 0..n {
                        let hr = nc.x_hat.row(r);
                        for (u, &d) in dy.row(r).iter().enumerate() {
                            dgamma[u] += d * hr[u];
                            dbeta[u] += d;
                        }
                    }
                    let mut dz = Matrix::zeros(n, units);
                    match cache.mode {
                        Mode::Infer => {
                            for r in 0..n {
                                let dr = dy.row(r);
                                for (u, o) in dz.row_mut(r).iter_mut().enumerate() {
                                    *o = dr[u] * bn.gamma[u] * nc.inv_std[u];
                                }
                            }
                        }
                        Mode::Train => {
                            // dx̂ = dy·γ;  dz = inv_std/N · (N·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂))
                            let nf = n as f64;
                            let sum_dxhat: Vec<f64> = (0..units).map(|u| dbeta[u] * bn.gamma[u]).collect();
                            let sum_dxhat_xhat: Vec<f64> = (0..units).map(|u| dgamma[u] * bn.gamma[u]).collect();
                            for r in 0..n {
                                let dr = dy.row(r);
                                let hr = nc.x_hat.row(r);
                                for (u, o) in dz.row_mut(r).iter_mut().enumerate() {
                                    let dxhat = dr[u] * bn.gamma[u];
                                    *o = nc.inv_std[u] / nf
                                        * (nf * dxhat - sum_dxhat[u] - hr[u] * sum_dxhat_xhat[u]);
                                }
                            }
                        }
                    }
                    (dz, Some((dgamma, dbeta)))
                }
                (Some(_), None) => {
                    return Err(Error::InvalidState(format!("cache lacks normalization for layer {i}")))
                }
            };
            let dweight = lc.input.t_matmul(&dz)?;
            let dbias = dz.column_sums();
            upstream = dz.matmul_t(&layer.weight)?;
            let (gamma, beta) = match bn_grads {
                Some((g, b)) => (Some(g), Some(b)),
                None => (None, None),
            };
            grads.push(LayerGrad {
                weight: dweight,
                bias: dbias,
                gamma,
                beta,
            });
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }

    /// Mutable views of every parameter tensor, paired with whether weight
    /// decay applies to it. Order matches [`Gradients::tensors`].
    pub fn param_tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        self.version += 1;
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push((layer.weight.as_mut_slice(), true));
            out.push((layer.bias.as_mut_slice(), false));
            if let Some(bn) = layer.bn.as_mut() {
                out.push((bn.gamma.as_mut_slice(), false));
                out.push((bn.beta.as_mut_slice(), false));
            }
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.rows() * layer.weight.cols());
            out.push(layer.bias.len());
            if let Some(bn) = &layer.bn {
                out.push(bn.units());
                out.push(bn.units());
            }
        }
        out
    }
}

fn batch_moments(z: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let mean = z.column_means();
    let mut var = vec![0.0; z.cols()];
    for row in z.row_iter() {
        for (u, v) in row.iter().enumerate() {
            let d = v - mean[u];
            var[u] += d * d;
        }
    }
    let n = z.rows() as f64;
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
struct NormCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    norm: Option<NormCache>,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    mode: Mode,
    version: u64,
    batch: usize,
    layers: Vec<LayerCache>,
}

impl Cache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Pre-activation values `γ·x̂ + β` of every hidden unit, row-major per layer.
    /// Used by gradient checks to stay clear of ReLU kinks.
    pub fn hidden_preactivations(&self, model: &MlpClassifier) -> Vec<f64> {
        let mut out = Vec::new();
        for (layer, lc) in model.layers.iter().zip(&self.layers) {
            if let (Some(bn), Some(nc)) = (&layer.bn, &lc.norm) {
                for r in 0..nc.x_hat.rows() {
                    for (u, h) in nc.x_hat.row(r).iter().enumerate() {
                        out.push(bn.gamma[u] * h + bn.beta[u]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Per-head probabilities, `batch × categories`.
    pub heads: Vec<Matrix>,
    pub cache: Cache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Matrix,
}

impl Gradients {
    /// Parameter gradients in the order of [`MlpClassifier::param_tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.push(g.weight.as_slice());
            out.push(g.bias.as_slice());
            if let (Some(gm), Some(bt)) = (&g.gamma, &g.beta) {
                out.push(gm.as_slice());
                out.push(bt.as_slice());
            }
        }
        out
    }

    /// Adds another pass's gradients (parameters and input) into `self`.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::Shape("gradient depth mismatch".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight)?;
            add_vec(&mut a.bias, &b.bias);
            if let (Some(x), Some(y)) = (a.gamma.as_mut(), b.gamma.as_ref()) {
                add_vec(x, y);
            }
            if let (Some(x), Some(y)) = (a.beta.as_mut(), b.beta.as_ref()) {
                add_vec(x, y);
            }
        }
        if self.input.shape() == other.input.shape() {
            self.input.add_assign(&other.input)?;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(self.input.max_abs(), |m, v| m.max(v.abs()))
    }
}

fn add_vec(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
