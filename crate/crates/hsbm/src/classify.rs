//! Classifiers over node features: the closed-form Bayes rules for raw
//! and neighborhood-averaged Gaussian features, their exact linear-layer
//! instances, and a small trainable softmax network with an optional
//! hidden layer and in-network aggregation. Also the confusion-matrix
//! plumbing and the gain-versus-confusion correlation diagnostic.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_l, aggregate_once, AggregationConfig, Precision};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::{GraphSample, HsbmParams};
use crate::rng::{stream_rng, Stream};
use crate::theory::GainReport;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn predict(&self, x: &[f64]) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BayesKind {
    Raw,
    Aggregated,
}

/// Closed-form optimal classifier for class-conditional Gaussians.
///
/// Raw features share one variance, so the rule is linear:
/// `argmax_k <x, mu_k> + sigma^2 ln eta_k`. Averaged features have
/// per-class variances `sigma_k = sigma / sqrt(dbar_k)`, giving the
/// quadratic score `ln eta_k - ln sigma_k - ||x - mu_k||^2 /
/// (2 sigma_k^2)`.
#[derive(Debug, Clone)]
pub struct BayesModel {
    pub kind: BayesKind,
    /// Row k: class mean in feature space.
    pub means: Mat,
    /// Raw: `sigma^2 ln eta_k`. Aggregated: `ln eta_k - ln sigma_k`.
    pub log_prior_terms: Vec<f64>,
    /// Per-class standard deviation of the features.
    pub variance_terms: Vec<f64>,
}

impl BayesModel {
    pub fn score(&self, x: &[f64], k: usize) -> f64 {
        match self.kind {
            BayesKind::Raw => {
                let dot: f64 = x.iter().zip(self.means.row(k)).map(|(a, b)| a * b).sum();
                dot + self.log_prior_terms[k]
            }
            BayesKind::Aggregated => {
                let sq: f64 = x
                    .iter()
                    .zip(self.means.row(k))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                self.log_prior_terms[k] - sq / (2.0 * self.variance_terms[k].powi(2))
            }
        }
    }
}

impl Classifier for BayesModel {
    fn predict(&self, x: &[f64]) -> usize {
        let scores: Vec<f64> = (0..self.means.nrows()).map(|k| self.score(x, k)).collect();
        argmax(&scores)
    }
}

fn class_means(params: &HsbmParams) -> Mat {
    let mut means = Mat::zeros(params.c, params.d);
    for k in 0..params.c {
        means[(k, k)] = params.mean_scale;
    }
    means
}

/// Bayes rule on raw features.
pub fn bayes_raw(params: &HsbmParams) -> BayesModel {
    let s2 = params.sigma * params.sigma;
    BayesModel {
        kind: BayesKind::Raw,
        means: class_means(params),
        log_prior_terms: params.eta.iter().map(|&e| s2 * e.ln()).collect(),
        variance_terms: vec![params.sigma; params.c],
    }
}

/// Bayes rule after one aggregation step: class-k nodes concentrate at
/// `mu_k = sum_t mhat_kt mu_t` with deviation `sigma / sqrt(dbar_k)`.
/// Only valid without per-node neighborhood noise.
pub fn bayes_aggregated(params: &HsbmParams) -> Result<BayesModel> {
    if params.delta != 0.0 {
        return Err(Error::AssumptionViolation(
            "aggregated Bayes rule assumes delta = 0".into(),
        ));
    }
    let base = class_means(params);
    let mut means = Mat::zeros(params.c, params.d);
    for k in 0..params.c {
        for t in 0..params.c {
            let w = params.mhat[(k, t)];
            for j in 0..params.d {
                means[(k, j)] += w * base[(t, j)];
            }
        }
    }
    let sigmas: Vec<f64> = params.dbar.iter().map(|&d| params.sigma / d.sqrt()).collect();
    let log_prior_terms = params
        .eta
        .iter()
        .zip(&sigmas)
        .map(|(&e, &s)| e.ln() - s.ln())
        .collect();
    Ok(BayesModel {
        kind: BayesKind::Aggregated,
        means,
        log_prior_terms,
        variance_terms: sigmas,
    })
}

/// One linear layer: `logits = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNet {
    /// `d x c`.
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl LinearNet {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (j, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += v * self.weight[(j, k)];
            }
        }
        out
    }
}

impl Classifier for LinearNet {
    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }
}

/// Express a Bayes rule as a single linear layer with identical argmax.
/// The aggregated case is linear only when all class variances agree,
/// i.e. equal mean degrees.
pub fn bayes_to_linear(model: &BayesModel) -> Result<LinearNet> {
    let c = model.means.nrows();
    let d = model.means.ncols();
    let mut weight = Mat::zeros(d, c);
    let mut bias = vec![0.0; c];
    match model.kind {
        BayesKind::Raw => {
            for k in 0..c {
                for j in 0..d {
                    weight[(j, k)] = model.means[(k, j)];
                }
                bias[k] = model.log_prior_terms[k];
            }
        }
        BayesKind::Aggregated => {
            let s0 = model.variance_terms[0];
            if model
                .variance_terms
                .iter()
                .any(|&s| (s - s0).abs() > 1e-12 * s0)
            {
                return Err(Error::AssumptionViolation(
                    "aggregated Bayes rule is linear only with equal class variances".into(),
                ));
            }
            let s2 = s0 * s0;
            for k in 0..c {
                let mut norm_sq = 0.0;
                for j in 0..d {
                    weight[(j, k)] = model.means[(k, j)];
                    norm_sq += model.means[(k, j)].powi(2);
                }
                // ln eta_k - ln s0 maps to s2 * ln eta_k after scaling
                // every score by s2; the shared -ln s0 cancels.
                bias[k] = s2 * (model.log_prior_terms[k] + s0.ln()) - 0.5 * norm_sq;
            }
        }
    }
    Ok(LinearNet { weight, bias })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub c: usize,
    /// Row-major, rows = true class, columns = predicted.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(c: usize) -> Self {
        ConfusionMatrix {
            c,
            counts: vec![0; c * c],
        }
    }

    pub fn get(&self, t: usize, k: usize) -> u64 {
        self.counts[t * self.c + k]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.c + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of correct predictions, as a percentage.
    pub fn accuracy_percent(&self) -> f64 {
        let correct: u64 = (0..self.c).map(|k| self.get(k, k)).sum();
        100.0 * correct as f64 / self.total() as f64
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks_exact(self.c).map(<[u64]>::to_vec).collect()
    }
}

/// Confusion counts of a classifier on a node subset.
pub fn confusion(
    model: &dyn Classifier,
    features: &Mat,
    labels: &[usize],
    node_set: &[usize],
    c: usize,
) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::zeros(c);
    for &i in node_set {
        cm.record(labels[i], model.predict(features.row(i)));
    }
    cm
}

/// Gain-versus-confusion correlation over unordered class pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PearsonDiag {
    /// Per-pair gains, pairs ordered (0,1), (0,2), ..., (c-2,c-1).
    pub x: Vec<f64>,
    /// Per-pair confusion-count change, same order.
    pub y: Vec<f64>,
    pub r: f64,
    /// Either series was constant, making the correlation meaningless.
    pub degenerate: bool,
}

/// Correlate per-pair gains with the change in pairwise confusion counts
/// between the aggregated and the baseline classifier.
pub fn pearson_gain_vs_confusion(
    gains: &GainReport,
    cm_gcn: &ConfusionMatrix,
    cm_mlp: &ConfusionMatrix,
) -> PearsonDiag {
    let c = gains.c();
    assert_eq!(cm_gcn.c, c);
    assert_eq!(cm_mlp.c, c);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for t in 0..c {
        for k in (t + 1)..c {
            x.push(gains.gains[(t, k)]);
            let gcn = cm_gcn.get(t, k) + cm_gcn.get(k, t);
            let mlp = cm_mlp.get(t, k) + cm_mlp.get(k, t);
            y.push(gcn as f64 - mlp as f64);
        }
    }
    let (r, degenerate) = pearson(&x, &y);
    PearsonDiag { x, y, r, degenerate }
}

/// Pearson correlation; flags a constant series instead of dividing by
/// zero.
pub fn pearson(x: &[f64], y: &[f64]) -> (f64, bool) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 1e-24 || syy <= 1e-24 {
        return (0.0, true);
    }
    (sxy / (sxx * syy).sqrt(), false)
}

/// Disjoint train/validation/test node sets covering all nodes.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random 60/20/20 split.
pub fn split_nodes(n: usize, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, Stream::Split, 0);
    order.shuffle(&mut rng);
    let train_end = n * 60 / 100;
    let val_end = n * 80 / 100;
    Split {
        train: order[..train_end].to_vec(),
        val: order[train_end..val_end].to_vec(),
        test: order[val_end..].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Full-batch gradient descent.
    Gd,
    Adam,
}

/// One grid point of hyperparameters. `hidden = 0` means no hidden
/// layer (plain softmax regression).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub epochs: usize,
    pub optimizer: Optimizer,
    /// Standardize each input dimension to zero mean and unit deviation
    /// using statistics of the train split.
    pub standardize: bool,
}

impl TrainConfig {
    /// Reduced configuration for the synthetic experiments: one softmax
    /// layer, full-batch gradient descent, no regularization.
    pub fn synthetic() -> Self {
        TrainConfig {
            hidden_sizes: vec![0],
            learning_rates: vec![0.1],
            weight_decays: vec![0.0],
            dropouts: vec![0.0],
            epochs: 500,
            optimizer: Optimizer::Gd,
            standardize: true,
        }
    }

    /// Full grid search used for real-format runs.
    pub fn grid_search() -> Self {
        TrainConfig {
            hidden_sizes: vec![16, 32, 64, 128, 256],
            learning_rates: vec![0.001, 0.005, 0.01],
            weight_decays: vec![0.0, 1e-5, 5e-4, 1e-4],
            dropouts: vec![0.0, 0.2, 0.5],
            epochs: 200,
            optimizer: Optimizer::Adam,
            standardize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty()
            || self.learning_rates.is_empty()
            || self.weight_decays.is_empty()
            || self.dropouts.is_empty()
        {
            return Err(Error::ConfigError("empty hyperparameter grid".into()));
        }
        if self.learning_rates.iter().any(|&lr| lr <= 0.0) {
            return Err(Error::ConfigError("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::ConfigError("epochs must be >= 1".into()));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<HyperParams> {
        let mut combos = Vec::new();
        for &hidden in &self.hidden_sizes {
            for &learning_rate in &self.learning_rates {
                for &weight_decay in &self.weight_decays {
                    for &dropout in &self.dropouts {
                        combos.push(HyperParams {
                            hidden,
                            learning_rate,
                            weight_decay,
                            dropout,
                        });
                    }
                }
            }
        }
        combos
    }
}

/// Softmax network with at most one ReLU hidden layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// `(d x h, h)` when a hidden layer is present.
    pub hidden: Option<(Mat, Vec<f64>)>,
    /// `(h_or_d x c, c)`.
    pub out: (Mat, Vec<f64>),
    /// Per-dimension input shift and scale applied before the first
    /// layer.
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
}

impl Classifier for Mlp {
    fn predict(&self, x: &[f64]) -> usize {
        let x: Vec<f64> = x
            .iter()
            .zip(self.input_shift.iter().zip(&self.input_scale))
            .map(|(&v, (&m, &s))| (v - m) * s)
            .collect();
        let z = match &self.hidden {
            Some((w1, b1)) => {
                let h = w1.ncols();
                let mut act = b1.clone();
                for (j, &v) in x.iter().enumerate() {
                    for k in 0..h {
                        act[k] += v * w1[(j, k)];
                    }
                }
                for a in &mut act {
                    *a = a.max(0.0);
                }
                act
            }
            None => x,
        };
        let (w2, b2) = &self.out;
        let c = b2.len();
        let mut logits = b2.clone();
        for (j, &v) in z.iter().enumerate() {
            for k in 0..c {
                logits[k] += v * w2[(j, k)];
            }
        }
        argmax(&logits)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    /// Test accuracy in percent.
    pub accuracy: f64,
    /// Test confusion counts, row-major, rows = true class.
    pub confusion: Vec<Vec<u64>>,
    pub selected_hyperparams: HyperParams,
    pub seed: u64,
}

pub struct TrainOutcome {
    pub model: Mlp,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub val_accuracy: f64,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

fn update_params(
    params: &mut [f64],
    grad: &[f64],
    lr: f64,
    optimizer: Optimizer,
    state: &mut AdamState,
) {
    match optimizer {
        Optimizer::Gd => {
            for (p, &g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            const EPS: f64 = 1e-8;
            state.t += 1;
            let bc1 = 1.0 - B1.powi(state.t);
            let bc2 = 1.0 - B2.powi(state.t);
            for ((p, &g), (m, v)) in params
                .iter_mut()
                .zip(grad)
                .zip(state.m.iter_mut().zip(&mut state.v))
            {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + EPS);
            }
        }
    }
}

/// Transpose of one row-normalized averaging step, for gradients
/// flowing back through in-network aggregation.
fn agg_backward(graph: &GraphSample, g: &Mat) -> Mat {
    let n = graph.n;
    let d = g.ncols();
    let mut out = Mat::zeros(n, d);
    for i in 0..n {
        if graph.degrees[i] == 0 {
            for (o, &v) in out.row_mut(i).iter_mut().zip(g.row(i)) {
                *o += v;
            }
            continue;
        }
        let scale = 1.0 / graph.degrees[i] as f64;
        for &j in &graph.neighbors[i] {
            let src = g.row(i);
            let dst = out.row_mut(j as usize);
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += scale * v;
            }
        }
    }
    out
}

/// Train one grid point; returns the model and its validation accuracy.
/// `hidden_agg` applies that many averaging steps to the hidden
/// activations (the in-network aggregation variant).
#[allow(clippy::too_many_arguments)]
fn train_one(
    x: &Mat,
    labels: &[usize],
    c: usize,
    split: &Split,
    hp: HyperParams,
    epochs: usize,
    optimizer: Optimizer,
    standardize: bool,
    hidden_agg: Option<(&GraphSample, u32)>,
    rng: &mut impl Rng,
) -> (Mlp, f64) {
    let n = x.nrows();
    let d = x.ncols();

    let (shift, scale) = if standardize {
        let mut mean = vec![0.0; d];
        for &i in &split.train {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        let m_inv = 1.0 / split.train.len() as f64;
        for m in &mut mean {
            *m *= m_inv;
        }
        let mut var = vec![0.0; d];
        for &i in &split.train {
            for ((v, &m), &val) in var.iter_mut().zip(&mean).zip(x.row(i)) {
                *v += (val - m) * (val - m);
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                let s = (v * m_inv).sqrt();
                if s > 0.0 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        (mean, scale)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let mut xs = Mat::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            xs[(i, j)] = (x[(i, j)] - shift[j]) * scale[j];
        }
    }

    let h = hp.hidden;
    let mut w1 = if h > 0 {
        let std = (2.0 / d as f64).sqrt();
        let mut w = Mat::zeros(d, h);
        for v in w.as_mut_slice() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
        Some(w)
    } else {
        None
    };
    let mut b1 = vec![0.0; h];
    let out_in = if h > 0 { h } else { d };
    let mut w2 = {
        let std = (1.0 / out_in as f64).sqrt();
        let mut w = Mat::zeros(out_in, c);
        for v in w.as_mut_slice() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
        w
    };
    let mut b2 = vec![0.0; c];

    let mut st_w1 = AdamState::new(d * h);
    let mut st_b1 = AdamState::new(h);
    let mut st_w2 = AdamState::new(out_in * c);
    let mut st_b2 = AdamState::new(c);

    let m_inv = 1.0 / split.train.len() as f64;
    let mut in_train = vec![false; n];
    for &i in &split.train {
        in_train[i] = true;
    }

    for _ in 0..epochs {
        // Forward over all nodes (aggregation mixes splits).
        let (pre, hidden_act, mask) = if let Some(w1) = &w1 {
            let mut pre = Mat::zeros(n, h);
            for i in 0..n {
                let row = pre.row_mut(i);
                row.copy_from_slice(&b1);
                for (j, &v) in xs.row(i).iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for (r, k) in row.iter_mut().zip(0..h) {
                        *r += v * w1[(j, k)];
                    }
                }
            }
            let mut act = pre.clone();
            for v in act.as_mut_slice() {
                *v = v.max(0.0);
            }
            let mask = if hp.dropout > 0.0 {
                let keep = 1.0 - hp.dropout;
                let mut mask = vec![0.0f64; n * h];
                for m in &mut mask {
                    *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                }
                for (v, &m) in act.as_mut_slice().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            } else {
                None
            };
            (Some(pre), Some(act), mask)
        } else {
            (None, None, None)
        };

        let z = match &hidden_act {
            Some(act) => {
                let mut z = act.clone();
                if let Some((graph, depth)) = hidden_agg {
                    let cfg = AggregationConfig::default();
                    for _ in 0..depth {
                        z = aggregate_once(graph, &z, &cfg);
                    }
                }
                z
            }
            None => xs.clone(),
        };

        // Softmax gradient on train rows only.
        let mut dlogits = Mat::zeros(n, c);
        for &i in &split.train {
            let mut logits = b2.clone();
            for (j, &v) in z.row(i).iter().enumerate() {
                for k in 0..c {
                    logits[k] += v * w2[(j, k)];
                }
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max
                + logits
                    .iter()
                    .map(|&l| (l - max).exp())
                    .sum::<f64>()
                    .ln();
            let row = dlogits.row_mut(i);
            for k in 0..c {
                row[k] = ((logits[k] - lse).exp() - f64::from(labels[i] == k)) * m_inv;
            }
        }

        // Output layer gradients.
        let mut g_w2 = vec![0.0; out_in * c];
        let mut g_b2 = vec![0.0; c];
        for &i in &split.train {
            let dl = dlogits.row(i);
            for (k, &g) in dl.iter().enumerate() {
                g_b2[k] += g;
            }
            for (j, &v) in z.row(i).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (k, &g) in dl.iter().enumerate() {
                    g_w2[j * c + k] += v * g;
                }
            }
        }
        if hp.weight_decay > 0.0 {
            for (g, &w) in g_w2.iter_mut().zip(w2.as_slice()) {
                *g += hp.weight_decay * w;
            }
        }

        if let (Some(w1m), Some(pre), Some(act)) = (&mut w1, &pre, &hidden_act) {
            // dz = dlogits W2^T, then back through aggregation, dropout
            // and the ReLU.
            let mut dz = Mat::zeros(n, h);
            for &i in &split.train {
                let dl = dlogits.row(i);
                let row = dz.row_mut(i);
                for (j, r) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (k, &g) in dl.iter().enumerate() {
                        acc += g * w2[(j, k)];
                    }
                    *r = acc;
                }
            }
            if let Some((graph, depth)) = hidden_agg {
                for _ in 0..depth {
                    dz = agg_backward(graph, &dz);
                }
            }
            if let Some(mask) = &mask {
                for (v, &m) in dz.as_mut_slice().iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            let _ = act;
            for (v, &p) in dz.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if p <= 0.0 {
                    *v = 0.0;
                }
            }

            let mut g_w1 = vec![0.0; d * h];
            let mut g_b1 = vec![0.0; h];
            for i in 0..n {
                let dzr = dz.row(i);
                if dzr.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for (k, &g) in dzr.iter().enumerate() {
                    g_b1[k] += g;
                }
                for (j, &v) in xs.row(i).iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for (k, &g) in dzr.iter().enumerate() {
                        g_w1[j * h + k] += v * g;
                    }
                }
            }
            if hp.weight_decay > 0.0 {
                for (g, &w) in g_w1.iter_mut().zip(w1m.as_slice()) {
                    *g += hp.weight_decay * w;
                }
            }
            update_params(w1m.as_mut_slice(), &g_w1, hp.learning_rate, optimizer, &mut st_w1);
            update_params(&mut b1, &g_b1, hp.learning_rate, optimizer, &mut st_b1);
        }

        update_params(w2.as_mut_slice(), &g_w2, hp.learning_rate, optimizer, &mut st_w2);
        update_params(&mut b2, &g_b2, hp.learning_rate, optimizer, &mut st_b2);
    }

    let model = Mlp {
        hidden: w1.map(|w| (w, b1)),
        out: (w2, b2),
        input_shift: shift,
        input_scale: scale,
    };
    let val_acc = eval_accuracy(&model, x, labels, &split.val, c, hidden_agg);
    (model, val_acc)
}

/// Accuracy in percent of a trained net on a node subset, with the
/// in-network aggregation replayed when present.
fn eval_accuracy(
    model: &Mlp,
    x: &Mat,
    labels: &[usize],
    node_set: &[usize],
    c: usize,
    hidden_agg: Option<(&GraphSample, u32)>,
) -> f64 {
    eval_confusion(model, x, labels, node_set, c, hidden_agg).accuracy_percent()
}

fn eval_confusion(
    model: &Mlp,
    x: &Mat,
    labels: &[usize],
    node_set: &[usize],
    c: usize,
    hidden_agg: Option<(&GraphSample, u32)>,
) -> ConfusionMatrix {
    match (&model.hidden, hidden_agg) {
        (Some((w1, b1)), Some((graph, depth))) => {
            // Full-graph forward: standardize, hidden layer, aggregate,
            // then classify the requested rows.
            let n = x.nrows();
            let h = b1.len();
            let mut act = Mat::zeros(n, h);
            for i in 0..n {
                let row = act.row_mut(i);
                row.copy_from_slice(b1);
                for (j, &raw) in x.row(i).iter().enumerate() {
                    let v = (raw - model.input_shift[j]) * model.input_scale[j];
                    if v == 0.0 {
                        continue;
                    }
                    for (r, k) in row.iter_mut().zip(0..h) {
                        *r += v * w1[(j, k)];
                    }
                }
                for r in row {
                    *r = r.max(0.0);
                }
            }
            let cfg = AggregationConfig::default();
            for _ in 0..depth {
                act = aggregate_once(graph, &act, &cfg);
            }
            let (w2, b2) = &model.out;
            let mut cm = ConfusionMatrix::zeros(c);
            for &i in node_set {
                let mut logits = b2.clone();
                for (j, &v) in act.row(i).iter().enumerate() {
                    for k in 0..c {
                        logits[k] += v * w2[(j, k)];
                    }
                }
                cm.record(labels[i], argmax(&logits));
            }
            cm
        }
        _ => confusion(model, x, labels, node_set, c),
    }
}

fn run_grid(
    x: &Mat,
    labels: &[usize],
    c: usize,
    split: &Split,
    cfg: &TrainConfig,
    hidden_agg: Option<(&GraphSample, u32)>,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut best: Option<(Mlp, f64, HyperParams)> = None;
    for (idx, hp) in cfg.grid().into_iter().enumerate() {
        let mut rng = stream_rng(seed, Stream::Train, idx as u64);
        let agg = if hp.hidden > 0 { hidden_agg } else { None };
        let (model, val_acc) = train_one(
            x,
            labels,
            c,
            split,
            hp,
            cfg.epochs,
            cfg.optimizer,
            cfg.standardize,
            agg,
            &mut rng,
        );
        let better = best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc);
        if better {
            best = Some((model, val_acc, hp));
        }
    }
    let (model, val_accuracy, hp) = best.unwrap();
    let agg = if hp.hidden > 0 { hidden_agg } else { None };
    let cm = eval_confusion(&model, x, labels, &split.test, c, agg);
    let metrics = Metrics {
        accuracy: cm.accuracy_percent(),
        confusion: cm.rows(),
        selected_hyperparams: hp,
        seed,
    };
    Ok(TrainOutcome {
        model,
        metrics,
        confusion: cm,
        val_accuracy,
    })
}

/// Grid-searched softmax network on plain features.
pub fn train_mlp(
    features: &Mat,
    labels: &[usize],
    split: &Split,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let c = labels.iter().copied().max().map_or(0, |m| m + 1);
    run_grid(features, labels, c, split, cfg, None, seed)
}

/// Same network with aggregation: features are pre-aggregated for the
/// one-layer variant, while two-layer grid points aggregate the hidden
/// activations instead.
pub fn train_gcn(
    graph: &GraphSample,
    cfg: &TrainConfig,
    agg_cfg: &AggregationConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let features = graph
        .features
        .as_ref()
        .ok_or_else(|| Error::ConfigError("graph bundle has no features".into()))?;
    let split = split_nodes(graph.n, seed);
    let only_linear = cfg.hidden_sizes.iter().all(|&h| h == 0);
    if only_linear {
        let aggregated = aggregate_l(graph, features, agg_cfg);
        return run_grid(&aggregated, &graph.labels, graph.c, &split, cfg, None, seed);
    }
    if agg_cfg.precision != Precision::Double {
        // In-network aggregation runs in f64; the precision study uses
        // the one-layer variant.
        return Err(Error::ConfigError(
            "hidden-layer aggregation supports double precision only".into(),
        ));
    }
    run_grid(
        features,
        &graph.labels,
        graph.c,
        &split,
        cfg,
        Some((graph, agg_cfg.layers)),
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, pattern_family_a};
    use approx::assert_abs_diff_eq;

    fn synthetic(a: f64) -> HsbmParams {
        HsbmParams::synthetic(pattern_family_a(a, 5).unwrap())
    }

    #[test]
    fn bayes_raw_predicts_means() {
        let params = synthetic(0.2);
        let model = bayes_raw(&params);
        for k in 0..5 {
            assert_eq!(model.predict(model.means.row(k)), k);
        }
    }

    #[test]
    fn bayes_raw_tie_breaks_low() {
        let params = synthetic(0.2);
        let model = bayes_raw(&params);
        // Equidistant from means 0 and 1, far from the rest.
        let x = [0.5, 0.5, -5.0, -5.0, -5.0];
        assert_eq!(model.predict(&x), 0);
    }

    #[test]
    fn bayes_aggregated_predicts_means() {
        let params = synthetic(0.25);
        let model = bayes_aggregated(&params).unwrap();
        for k in 0..5 {
            assert_eq!(model.predict(model.means.row(k)), k);
            // Aggregated mean = pattern row scaled by the mean norm.
            for t in 0..5 {
                assert_abs_diff_eq!(model.means[(k, t)], params.mhat[(k, t)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bayes_aggregated_rejects_noise() {
        let mut params = synthetic(0.2);
        params.delta = 0.01;
        assert!(bayes_aggregated(&params).is_err());
    }

    #[test]
    fn linear_equivalence_raw() {
        let mut params = synthetic(0.2);
        params.eta = vec![0.3, 0.25, 0.2, 0.15, 0.1];
        let bayes = bayes_raw(&params);
        let net = bayes_to_linear(&bayes).unwrap();
        let mut rng = stream_rng(0, Stream::Train, 0);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..5).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            assert_eq!(net.predict(&x), bayes.predict(&x));
        }
    }

    #[test]
    fn linear_equivalence_aggregated() {
        let mut params = synthetic(0.25);
        params.eta = vec![0.35, 0.3, 0.15, 0.1, 0.1];
        let bayes = bayes_aggregated(&params).unwrap();
        let net = bayes_to_linear(&bayes).unwrap();
        let mut rng = stream_rng(1, Stream::Train, 0);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..5)
                .map(|_| 0.2 + 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            assert_eq!(net.predict(&x), bayes.predict(&x));
        }
    }

    #[test]
    fn linear_rejects_unequal_degrees() {
        let mut params = synthetic(0.2);
        params.dbar = vec![10.0, 25.0, 25.0, 25.0, 25.0];
        let bayes = bayes_aggregated(&params).unwrap();
        assert!(matches!(
            bayes_to_linear(&bayes),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn nearest_mean_limit() {
        let mut params = synthetic(0.2);
        params.sigma = 1e-9;
        let net = bayes_to_linear(&bayes_raw(&params)).unwrap();
        // Bias vanishes with sigma^2: the rule is nearest-mean.
        let x = [0.9, 0.2, 0.1, 0.0, 0.0];
        assert_eq!(net.predict(&x), 0);
        let x = [0.1, 0.2, 0.9, 0.0, 0.0];
        assert_eq!(net.predict(&x), 2);
    }

    #[test]
    fn confusion_row_sums() {
        let params = synthetic(0.2);
        let graph = model::sample(&params, 3).unwrap();
        let features = graph.features.as_ref().unwrap();
        let bayes = bayes_raw(&params);
        let node_set: Vec<usize> = (0..params.n).collect();
        let cm = confusion(&bayes, features, &graph.labels, &node_set, 5);
        assert_eq!(cm.total() as usize, params.n);
        let counts = graph.class_counts();
        for (t, &count) in counts.iter().enumerate() {
            let row_sum: u64 = (0..5).map(|k| cm.get(t, k)).sum();
            assert_eq!(row_sum as usize, count);
        }
    }

    #[test]
    fn pearson_extremes() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|&v| -v).collect();
        let (r, degenerate) = pearson(&x, &y);
        assert!(!degenerate);
        assert_abs_diff_eq!(r, -1.0, epsilon = 1e-12);
        let (_, degenerate) = pearson(&[2.0; 4], &y);
        assert!(degenerate);
    }

    #[test]
    fn split_covers_all_nodes() {
        let split = split_nodes(1000, 5);
        assert_eq!(split.train.len(), 600);
        assert_eq!(split.val.len(), 200);
        assert_eq!(split.test.len(), 200);
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.val)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_empty_grid() {
        let mut cfg = TrainConfig::synthetic();
        cfg.learning_rates.clear();
        let params = synthetic(0.2);
        let graph = model::sample(&params, 0).unwrap();
        let split = split_nodes(params.n, 0);
        assert!(matches!(
            train_mlp(graph.features.as_ref().unwrap(), &graph.labels, &split, &cfg, 0),
            Err(Error::ConfigError(_))
        ));
    }

    #[test]
    fn separable_toy_set_is_learned() {
        // Two well-separated clusters.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng = stream_rng(9, Stream::Train, 0);
        for i in 0..200 {
            let l = i % 2;
            let center = if l == 0 { -2.0 } else { 2.0 };
            rows.push(vec![
                center + 0.1 * rng.sample::<f64, _>(StandardNormal),
                0.1 * rng.sample::<f64, _>(StandardNormal),
            ]);
            labels.push(l);
        }
        let features = Mat::from_rows(&rows);
        let mut cfg = TrainConfig::synthetic();
        cfg.epochs = 200;
        let split = split_nodes(200, 1);
        let out = train_mlp(&features, &labels, &split, &cfg, 1).unwrap();
        assert_eq!(out.metrics.accuracy, 100.0);
    }

    #[test]
    fn training_is_deterministic() {
        let params = synthetic(0.25);
        let graph = model::sample(&params, 11).unwrap();
        let cfg = TrainConfig::synthetic();
        let agg = AggregationConfig::layers(1);
        let a = train_gcn(&graph, &cfg, &agg, 11).unwrap();
        let b = train_gcn(&graph, &cfg, &agg, 11).unwrap();
        assert_eq!(a.metrics.accuracy, b.metrics.accuracy);
        assert_eq!(a.metrics.selected_hyperparams, b.metrics.selected_hyperparams);
        assert_eq!(a.confusion, b.confusion);
    }

    #[test]
    fn zero_layer_gcn_equals_mlp() {
        let params = synthetic(0.2);
        let graph = model::sample(&params, 13).unwrap();
        let cfg = TrainConfig::synthetic();
        let gcn = train_gcn(&graph, &cfg, &AggregationConfig::layers(0), 13).unwrap();
        let split = split_nodes(graph.n, 13);
        let mlp = train_mlp(graph.features.as_ref().unwrap(), &graph.labels, &split, &cfg, 13)
            .unwrap();
        assert_eq!(gcn.metrics.accuracy, mlp.metrics.accuracy);
        assert_eq!(gcn.confusion, mlp.confusion);
    }

    #[test]
    fn hidden_layer_gcn_trains() {
        let params = synthetic(0.25);
        let graph = model::sample(&params, 21).unwrap();
        let cfg = TrainConfig {
            hidden_sizes: vec![16],
            learning_rates: vec![0.01],
            weight_decays: vec![0.0],
            dropouts: vec![0.2],
            epochs: 120,
            optimizer: Optimizer::Adam,
            standardize: true,
        };
        let out = train_gcn(&graph, &cfg, &AggregationConfig::layers(1), 21).unwrap();
        assert!(out.metrics.accuracy > 75.0, "accuracy {}", out.metrics.accuracy);
    }

    #[test]
    fn metrics_json_shape() {
        let params = synthetic(0.2);
        let graph = model::sample(&params, 2).unwrap();
        let cfg = TrainConfig::synthetic();
        let out = train_gcn(&graph, &cfg, &AggregationConfig::layers(1), 2).unwrap();
        let json = serde_json::to_value(&out.metrics).unwrap();
        assert!(json.get("accuracy").is_some());
        assert!(json.get("confusion").unwrap().is_array());
        assert!(json.get("selected_hyperparams").is_some());
        assert_eq!(json.get("seed").unwrap().as_u64(), Some(2));
    }
}
