//! Mini-batch training loops for clustering and hashing.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_batch, radius_table, AffineRanges, PerturbKind, PerturbSpec, RadiusTable};
use crate::error::{Error, Result};
use crate::eval::{pack_bits, CodeBook};
use crate::matrix::Matrix;
use crate::nn::{default_scales, AdamConfig, AdamState, HeadLayout, MlpClassifier, Mode};
use crate::objectives::{
    conditional_entropy, kl_divergence, marginal_estimate, sat_loss_grad, ClusterObjective, HashObjective,
    PairCounting,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Cluster,
    Hash,
}

/// What keeps the classifier smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    Rpt,
    Vat,
    Affine,
    Composite,
    WeightDecay,
    None,
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rpt" => Ok(Self::Rpt),
            "vat" => Ok(Self::Vat),
            "affine" => Ok(Self::Affine),
            "composite" => Ok(Self::Composite),
            "weight_decay" => Ok(Self::WeightDecay),
            "none" => Ok(Self::None),
            _ => Err(Error::InvalidConfig(format!("unknown regularizer {s:?}"))),
        }
    }
}

impl Regularizer {
    fn perturb_kind(self) -> Option<PerturbKind> {
        match self {
            Self::Rpt => Some(PerturbKind::Rpt),
            Self::Vat => Some(PerturbKind::Vat),
            Self::Affine => Some(PerturbKind::Affine),
            Self::Composite => Some(PerturbKind::Composite),
            Self::WeightDecay | Self::None => None,
        }
    }
}

/// Named model/regularizer combinations with their tuned hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LinearRim,
    DeepRim,
    LinearImsatVat,
    ImsatRpt,
    ImsatVat,
    ImsatVatAffine,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_rim" => Ok(Self::LinearRim),
            "deep_rim" => Ok(Self::DeepRim),
            "linear_imsat_vat" => Ok(Self::LinearImsatVat),
            "imsat_rpt" => Ok(Self::ImsatRpt),
            "imsat_vat" => Ok(Self::ImsatVat),
            "imsat_vat_affine" => Ok(Self::ImsatVatAffine),
            _ => Err(Error::InvalidConfig(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    /// Number of clusters K, or number of bits D.
    pub n_out: usize,
    pub hidden: Vec<usize>,
    /// Init scale per weight matrix; `None` uses 0.1 for hidden and 1e-4 for the output.
    pub init_scales: Option<Vec<f64>>,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub alpha: f64,
    pub t_neighbor: usize,
    /// Same perturbation radius for every point instead of `alpha · σ_t`.
    pub fixed_eps: Option<f64>,
    pub xi: f64,
    pub power_iters: usize,
    pub mixture: Vec<(PerturbKind, f64)>,
    pub affine: AffineRanges,
    pub image_shape: Option<(usize, usize)>,
    pub weight_decay_rate: f64,
    pub delta_frac: f64,
    /// Target class prior; `None` is uniform.
    pub prior_q: Option<Vec<f64>>,
    /// Penalty weights tried in order; `None` is `λ·[1, 2, 4, 6, …, 20]`.
    pub mu_schedule: Option<Vec<f64>>,
    /// Continue from the previous penalty trial instead of re-initializing.
    pub warm_start: bool,
    pub pairs: PairCounting,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl TrainConfig {
    /// IMSAT with VAT: `λ = 0.1`, `α = 0.25`, `t = 10`, d-1200-1200-K.
    pub fn clustering(k: usize) -> Self {
        Self {
            task: Task::Cluster,
            n_out: k,
            hidden: vec![1200, 1200],
            init_scales: None,
            lambda: 0.1,
            regularizer: Regularizer::Vat,
            alpha: 0.25,
            t_neighbor: 10,
            fixed_eps: None,
            xi: 10.0,
            power_iters: 1,
            mixture: vec![(PerturbKind::Vat, 0.5), (PerturbKind::Affine, 0.5)],
            affine: AffineRanges::default(),
            image_shape: None,
            weight_decay_rate: 0.0,
            delta_frac: 0.01,
            prior_q: None,
            mu_schedule: None,
            warm_start: false,
            pairs: PairCounting::Ordered,
            batch_size: 250,
            epochs: 50,
            seed: 0,
            step_size: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }

    /// IMSAT with VAT for `bits`-bit codes, d-200-200-D.
    pub fn hashing(bits: usize) -> Self {
        Self {
            task: Task::Hash,
            hidden: vec![200, 200],
            ..Self::clustering(bits)
        }
    }

    /// Applies a preset's architecture depth, regularizer and tuned constants.
    pub fn with_variant(mut self, v: Variant) -> Self {
        let deep = if self.hidden.is_empty() {
            match self.task {
                Task::Cluster => vec![1200, 1200],
                Task::Hash => vec![200, 200],
            }
        } else {
            self.hidden.clone()
        };
        self.weight_decay_rate = 0.0;
        match v {
            Variant::LinearRim | Variant::DeepRim => {
                self.regularizer = Regularizer::WeightDecay;
                self.weight_decay_rate = 0.005;
                self.lambda = 0.1;
            }
            Variant::LinearImsatVat => {
                self.regularizer = Regularizer::Vat;
                self.lambda = 1.6;
                self.alpha = 0.4;
            }
            Variant::ImsatRpt => {
                self.regularizer = Regularizer::Rpt;
                self.lambda = 0.05;
                self.alpha = 2.5;
            }
            Variant::ImsatVat => {
                self.regularizer = Regularizer::Vat;
                self.lambda = 0.1;
                self.alpha = 0.25;
            }
            Variant::ImsatVatAffine => {
                self.regularizer = Regularizer::Composite;
                self.lambda = 0.1;
                self.alpha = 0.25;
                self.mixture = vec![(PerturbKind::Vat, 0.5), (PerturbKind::Affine, 0.5)];
            }
        }
        self.hidden = match v {
            Variant::LinearRim | Variant::LinearImsatVat => Vec::new(),
            _ => deep,
        };
        self
    }

    pub fn perturb_spec(&self) -> Option<PerturbSpec> {
        self.regularizer.perturb_kind().map(|kind| PerturbSpec {
            kind,
            alpha: self.alpha,
            t_neighbor: self.t_neighbor,
            xi: self.xi,
            power_iters: self.power_iters,
            mixture: self.mixture.clone(),
            affine: self.affine,
        })
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(self.n_out);
        dims
    }

    pub fn scales(&self) -> Vec<f64> {
        self.init_scales
            .clone()
            .unwrap_or_else(|| default_scales(self.hidden.len() + 1))
    }

    pub fn heads(&self) -> HeadLayout {
        match self.task {
            Task::Cluster => HeadLayout::Softmax(vec![self.n_out]),
            Task::Hash => HeadLayout::Sigmoid(self.n_out),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            step_size: self.step_size,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: if self.regularizer == Regularizer::WeightDecay {
                self.weight_decay_rate
            } else {
                0.0
            },
        }
    }

    pub fn mu_values(&self) -> Vec<f64> {
        self.mu_schedule.clone().unwrap_or_else(|| {
            let mut m = vec![1.0, 2.0];
            m.extend((2..=10).map(|i| 2.0 * i as f64));
            m.into_iter().map(|f| f * self.lambda).collect()
        })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self.task {
            Task::Cluster if self.n_out < 2 => return bad(format!("need K >= 2 clusters, got {}", self.n_out)),
            Task::Hash if self.n_out == 0 || self.n_out > 64 => {
                return bad(format!("hash bits must be in 1..=64, got {}", self.n_out))
            }
            _ => {}
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        if self.batch_size == 0 || self.batch_size > n {
            return bad(format!("batch size must be in 1..={n}, got {}", self.batch_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.step_size > 0.0) {
            return bad(format!("step size must be positive, got {}", self.step_size));
        }
        if !(self.weight_decay_rate >= 0.0) {
            return bad("weight decay rate must be >= 0".into());
        }
        if let Some(e) = self.fixed_eps {
            if !(e >= 0.0) || !e.is_finite() {
                return bad(format!("fixed eps must be >= 0, got {e}"));
            }
        }
        if self.scales().len() != self.hidden.len() + 1 {
            return bad("init_scales needs one entry per weight matrix".into());
        }
        if let Some(spec) = self.perturb_spec() {
            spec.validate()?;
            let uses_affine = spec.components().iter().any(|(k, _)| *k == PerturbKind::Affine);
            if uses_affine && self.image_shape.is_none() {
                return bad("affine augmentation needs an image shape".into());
            }
            if spec.needs_radius() && self.fixed_eps.is_none() && n <= self.t_neighbor {
                return bad(format!("need more than t = {} points, got {n}", self.t_neighbor));
            }
        }
        let mus = self.mu_values();
        if self.task == Task::Cluster && (mus.is_empty() || mus.iter().any(|m| !(*m >= 0.0))) {
            return bad("mu schedule must be a nonempty list of nonnegative values".into());
        }
        Ok(())
    }
}

/// Outcome of one penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTrial {
    pub mu: f64,
    pub final_kl: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean mini-batch objective of every epoch of the returned model's run.
    pub objective_trace: Vec<f64>,
    /// Full-data `KL[p(y) || q]` (clustering only).
    pub final_kl: Option<f64>,
    pub mu_final: Option<f64>,
    pub seconds: f64,
    /// Last-epoch means of each objective term, plus full-data diagnostics
    /// prefixed `full_`.
    pub loss_terms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<PenaltyTrial>,
}

/// Inference-mode probabilities over a large input, computed in row blocks.
pub fn predict_all(model: &MlpClassifier, data: &Matrix) -> Result<Vec<Matrix>> {
    const BLOCK: usize = 2048;
    let n = data.rows();
    if n <= BLOCK {
        return model.predict(data);
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut widths = Vec::new();
    for start in (0..n).step_by(BLOCK) {
        let idx: Vec<usize> = (start..(start + BLOCK).min(n)).collect();
        let heads = model.predict(&data.select_rows(&idx))?;
        if out.is_empty() {
            out = vec![Vec::with_capacity(n); heads.len()];
            widths = heads.iter().map(Matrix::cols).collect();
        }
        for (o, h) in out.iter_mut().zip(heads) {
            o.extend_from_slice(h.as_slice());
        }
    }
    out.into_iter()
        .zip(widths)
        .map(|(d, w)| Matrix::from_vec(n, w, d))
        .collect()
}

/// `N × D` matrix of `p(bit = 1)` from two-column sigmoid heads.
fn bit_probs(heads: &[Matrix]) -> Matrix {
    let n = heads[0].rows();
    let mut m = Matrix::zeros(n, heads.len());
    for (d, h) in heads.iter().enumerate() {
        for r in 0..n {
            m.set(r, d, h.get(r, 1));
        }
    }
    m
}

/// Spreads a gradient wrt `p(bit = 1)` onto the two-column heads.
fn bit_grad_to_heads(g: &Matrix) -> Vec<Matrix> {
    (0..g.cols())
        .map(|d| {
            let mut h = Matrix::zeros(g.rows(), 2);
            for r in 0..g.rows() {
                h.set(r, 1, g.get(r, d));
            }
            h
        })
        .collect()
}

enum Objective {
    Cluster(ClusterObjective),
    Hash(HashObjective),
}

impl Objective {
    /// Batch terms as `(name, value)` pairs and the gradient wrt head outputs.
    fn terms_and_grad(&self, heads: &[Matrix]) -> Result<(Vec<(&'static str, f64)>, Vec<Matrix>)> {
        match self {
            Objective::Cluster(o) => {
                let (t, g) = o.gradient(&heads[0])?;
                Ok((
                    vec![
                        ("cond_entropy", t.cond_entropy),
                        ("marginal_entropy", t.marginal_entropy),
                        ("kl", t.kl),
                        ("penalty", t.penalty),
                        ("info", t.total),
                    ],
                    vec![g],
                ))
            }
            Objective::Hash(o) => {
                let (t, g) = o.gradient(&bit_probs(heads))?;
                Ok((
                    vec![
                        ("marginal_entropy", t.marginal_entropy),
                        ("cond_entropy", t.cond_entropy),
                        ("redundancy", t.redundancy),
                        ("info", t.total),
                    ],
                    bit_grad_to_heads(&g),
                ))
            }
        }
    }
}

struct RunOutcome {
    trace: Vec<f64>,
    terms: BTreeMap<String, f64>,
}

/// Everything a single optimization run needs besides the model.
struct Run<'a> {
    data: &'a Matrix,
    cfg: &'a TrainConfig,
    spec: Option<PerturbSpec>,
    radius: Option<RadiusTable>,
}

impl Run<'_> {
    fn new<'a>(data: &'a Matrix, cfg: &'a TrainConfig) -> Result<Run<'a>> {
        let spec = cfg.perturb_spec();
        let radius = match &spec {
            Some(s) if s.needs_radius() => Some(match cfg.fixed_eps {
                Some(e) => RadiusTable::constant(data.rows(), e),
                None => radius_table(data, s.alpha, s.t_neighbor)?,
            }),
            _ => None,
        };
        Ok(Run {
            data,
            cfg,
            spec,
            radius,
        })
    }

    fn optimize(&self, model: &mut MlpClassifier, objective: &Objective, seed: u64) -> Result<RunOutcome> {
        let cfg = self.cfg;
        let n = self.data.rows();
        let mut adam = AdamState::for_model(model, cfg.adam())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut trace = Vec::with_capacity(cfg.epochs);
        let mut terms = BTreeMap::new();
        let components = self.spec.as_ref().map(PerturbSpec::components).unwrap_or_default();

        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut sums: BTreeMap<String, f64> = BTreeMap::new();
            let mut batches = 0usize;
            let mut epoch_total = 0.0;
            for idx in order.chunks(cfg.batch_size) {
                let xb = self.data.select_rows(idx);
                let pass = model.forward(&xb, Mode::Train)?;
                let (batch_terms, g) = objective.terms_and_grad(&pass.heads)?;
                let mut grads = model.backward(&pass.cache, &g)?;

                let mut sat = 0.0;
                if let Some(spec) = &self.spec {
                    let eps = self.radius.as_ref().map(|r| r.select(idx)).unwrap_or_default();
                    for &(kind, w) in &components {
                        if w == 0.0 {
                            continue;
                        }
                        let aug = augment_batch(
                            kind,
                            spec,
                            model,
                            &xb,
                            &pass.heads,
                            &eps,
                            cfg.image_shape,
                            Mode::Train,
                            &mut rng,
                        )?;
                        // Train-mode normalization, but the batch statistics of
                        // augmented inputs never reach the running averages.
                        let apass = model.forward(&aug, Mode::Train)?;
                        let (v, mut ag) = sat_loss_grad(&pass.heads, &apass.heads)?;
                        for m in &mut ag {
                            m.scale_in_place(w);
                        }
                        grads.accumulate(&model.backward(&apass.cache, &ag)?)?;
                        sat += w * v;
                    }
                }

                model.commit_batch_stats(&pass.cache)?;
                adam.step_model(model, &grads)?;

                let mut total = sat;
                for (name, v) in &batch_terms {
                    *sums.entry((*name).to_string()).or_default() += v;
                    if *name == "info" {
                        total += v;
                    }
                }
                *sums.entry("sat".into()).or_default() += sat;
                epoch_total += total;
                batches += 1;
            }
            let mean = epoch_total / batches as f64;
            if !mean.is_finite() {
                return Err(Error::InvalidState("objective became non-finite".into()));
            }
            trace.push(mean);
            terms = sums.into_iter().map(|(k, v)| (k, v / batches as f64)).collect();
            if let Some(t) = terms.remove("info") {
                terms.insert("total".into(), t + terms.get("sat").copied().unwrap_or(0.0));
            }
        }
        Ok(RunOutcome { trace, terms })
    }
}

fn cluster_diagnostics(model: &MlpClassifier, data: &Matrix, prior: &[f64]) -> Result<(f64, f64)> {
    let p = predict_all(model, data)?.swap_remove(0);
    let kl = kl_divergence(&marginal_estimate(&p)?, prior)?;
    Ok((kl, conditional_entropy(&p)?))
}

/// Trains a clustering model with the penalty method.
///
/// Every weight of the μ schedule gets its own training run (fresh
/// initialization from `cfg.seed` unless `warm_start`). The first run whose
/// full-data, inference-mode `KL[p(y) || q]` is at most `δ` is returned. If
/// none qualifies, the run with the smallest KL comes back inside
/// [`Error::ConstraintUnsatisfied`].
pub fn train_clustering(data: &Matrix, cfg: &TrainConfig) -> Result<(MlpClassifier, TrainReport)> {
    if cfg.task != Task::Cluster {
        return Err(Error::InvalidConfig("train_clustering needs task = cluster".into()));
    }
    cfg.validate(data.rows())?;
    let start = Instant::now();
    let prior = cfg
        .prior_q
        .clone()
        .unwrap_or_else(|| vec![1.0 / cfg.n_out as f64; cfg.n_out]);
    if prior.len() != cfg.n_out {
        return Err(Error::InvalidConfig(format!(
            "prior has {} entries for K = {}",
            prior.len(),
            cfg.n_out
        )));
    }
    let base = ClusterObjective::new(cfg.lambda, prior.clone(), cfg.delta_frac)?;
    let delta = base.delta;
    let run = Run::new(data, cfg)?;
    let dims = cfg.layer_dims(data.cols());
    let fresh = || MlpClassifier::new(&dims, cfg.heads(), &cfg.scales(), cfg.seed);

    let init_cond = cluster_diagnostics(&fresh()?, data, &prior)?.1;
    let mut trials = Vec::new();
    let mut best: Option<(f64, MlpClassifier, TrainReport)> = None;
    let mut prev: Option<MlpClassifier> = None;
    for (i, &mu) in cfg.mu_values().iter().enumerate() {
        let mut model = match (&prev, cfg.warm_start) {
            (Some(m), true) => m.clone(),
            _ => fresh()?,
        };
        let objective = Objective::Cluster(base.clone().with_mu(mu));
        let out = run.optimize(&mut model, &objective, cfg.seed.wrapping_add(i as u64))?;
        let (kl, cond) = cluster_diagnostics(&model, data, &prior)?;
        let satisfied = kl <= delta;
        log::info!("mu = {mu}: KL = {kl:.6} (delta {delta:.6}){}", if satisfied { ", accepted" } else { "" });
        trials.push(PenaltyTrial {
            mu,
            final_kl: kl,
            satisfied,
        });
        let mut terms = out.terms;
        terms.insert("full_kl".into(), kl);
        terms.insert("full_cond_entropy".into(), cond);
        terms.insert("full_cond_entropy_init".into(), init_cond);
        terms.insert(
            "full_objective".into(),
            cfg.lambda * cond + mu * (kl - delta).max(0.0),
        );
        let report = TrainReport {
            epochs: cfg.epochs,
            objective_trace: out.trace,
            final_kl: Some(kl),
            mu_final: Some(mu),
            seconds: 0.0,
            loss_terms: terms,
            delta: Some(delta),
            trials: Vec::new(),
        };
        if satisfied {
            let report = TrainReport {
                seconds: start.elapsed().as_secs_f64(),
                trials,
                ..report
            };
            return Ok((model, report));
        }
        if best.as_ref().is_none_or(|(b, _, _)| kl < *b) {
            best = Some((kl, model.clone(), report));
        }
        prev = Some(model);
    }
    let (best_kl, model, report) = best.expect("schedule is nonempty");
    let report = TrainReport {
        seconds: start.elapsed().as_secs_f64(),
        trials,
        ..report
    };
    Err(Error::ConstraintUnsatisfied {
        best_kl,
        delta,
        model: Box::new(model),
        report: Box::new(report),
    })
}

/// Trains `D` sigmoid bits on the hashing objective (no constraint).
pub fn train_hashing(data: &Matrix, cfg: &TrainConfig) -> Result<(MlpClassifier, TrainReport)> {
    if cfg.task != Task::Hash {
        return Err(Error::InvalidConfig("train_hashing needs task = hash".into()));
    }
    cfg.validate(data.rows())?;
    let start = Instant::now();
    let objective = Objective::Hash(HashObjective::new(cfg.lambda, cfg.n_out)?.with_pairs(cfg.pairs));
    let run = Run::new(data, cfg)?;
    let mut model = MlpClassifier::new(&cfg.layer_dims(data.cols()), cfg.heads(), &cfg.scales(), cfg.seed)?;
    let out = run.optimize(&mut model, &objective, cfg.seed)?;
    Ok((
        model,
        TrainReport {
            epochs: cfg.epochs,
            objective_trace: out.trace,
            final_kl: None,
            mu_final: None,
            seconds: start.elapsed().as_secs_f64(),
            loss_terms: out.terms,
            delta: None,
            trials: Vec::new(),
        },
    ))
}

/// Dispatches on `cfg.task`.
pub fn train(data: &Matrix, cfg: &TrainConfig) -> Result<(MlpClassifier, TrainReport)> {
    match cfg.task {
        Task::Cluster => train_clustering(data, cfg),
        Task::Hash => train_hashing(data, cfg),
    }
}

/// Index of the largest entry, ties to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Discrete outputs: argmax cluster for a single softmax head, or one bit per
/// sigmoid head set when `p > 0.5`.
pub fn encode(model: &MlpClassifier, data: &Matrix) -> Result<CodeBook> {
    let heads = predict_all(model, data)?;
    encode_probs(model.heads(), heads)
}

/// As [`encode`], from already computed head probabilities.
pub fn encode_probs(layout: &HeadLayout, heads: Vec<Matrix>) -> Result<CodeBook> {
    let mut cb = match layout {
        HeadLayout::Softmax(sizes) if sizes.len() == 1 => {
            let ids = heads[0].row_iter().map(argmax).collect();
            CodeBook::clusters(ids, sizes[0])?
        }
        HeadLayout::Sigmoid(bits) => {
            let p = bit_probs(&heads);
            let codes = p
                .row_iter()
                .map(|r| pack_bits(&r.iter().map(|&v| v > 0.5).collect::<Vec<_>>()))
                .collect();
            CodeBook::hash(codes, *bits)?
        }
        HeadLayout::Softmax(_) => {
            return Err(Error::InvalidInput("encoding needs a single softmax head or sigmoid bits".into()))
        }
    };
    cb.soft_probs = heads;
    Ok(cb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::CodeKind;

    #[test]
    fn defaults() {
        let c = TrainConfig::clustering(10);
        assert_eq!((c.lambda, c.alpha, c.t_neighbor), (0.1, 0.25, 10));
        assert_eq!((c.batch_size, c.epochs, c.delta_frac), (250, 50, 0.01));
        assert_eq!(c.layer_dims(784), vec![784, 1200, 1200, 10]);
        assert_eq!(c.scales(), vec![0.1, 0.1, 1e-4]);
        let mu = c.mu_values();
        assert_eq!(&mu[..4], &[0.1, 0.2, 0.4, 0.6000000000000001]);
        assert_eq!(c.adam().weight_decay, 0.0);
        assert_eq!(TrainConfig::hashing(16).layer_dims(5), vec![5, 200, 200, 16]);
    }

    #[test]
    fn variants() {
        let c = TrainConfig::clustering(3).with_variant(Variant::DeepRim);
        assert_eq!(c.regularizer, Regularizer::WeightDecay);
        assert_eq!(c.adam().weight_decay, 0.005);
        assert!(c.perturb_spec().is_none());
        let c = TrainConfig::clustering(3).with_variant(Variant::LinearImsatVat);
        assert!(c.hidden.is_empty());
        assert_eq!((c.lambda, c.alpha), (1.6, 0.4));
        let c = TrainConfig::clustering(3).with_variant(Variant::ImsatRpt);
        assert_eq!((c.lambda, c.alpha), (0.05, 2.5));
        let c = c.with_variant(Variant::ImsatVat);
        assert_eq!(c.adam().weight_decay, 0.0);
        assert_eq!(c.hidden, vec![1200, 1200]);
    }

    #[test]
    fn rejects_single_cluster() {
        let x = Matrix::zeros(20, 2);
        let mut c = TrainConfig::clustering(1);
        c.batch_size = 10;
        assert!(matches!(train_clustering(&x, &c), Err(Error::InvalidConfig(_))));
        let mut c = TrainConfig::clustering(2);
        c.batch_size = 21;
        assert!(matches!(train_clustering(&x, &c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn encode_rules() {
        let p = Matrix::from_rows(&[vec![0.1, 0.7, 0.2], vec![0.5, 0.5, 0.0]]).unwrap();
        let cb = encode_probs(&HeadLayout::Softmax(vec![3]), vec![p]).unwrap();
        assert_eq!(cb.cluster_ids(), vec![1, 0]);

        let heads: Vec<Matrix> = [0.9, 0.4, 0.5]
            .iter()
            .map(|&v| Matrix::from_rows(&[vec![1.0 - v, v]]).unwrap())
            .collect();
        let cb = encode_probs(&HeadLayout::Sigmoid(3), heads).unwrap();
        assert_eq!(cb.kind, CodeKind::Hash { bits: 3 });
        assert_eq!(cb.codes, vec![0b100]);
    }
}
