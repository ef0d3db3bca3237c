//! The heterophilous stochastic block model: class labels drawn from a
//! prior, directed edges drawn per class pair so nodes of one class share
//! a neighborhood distribution, and isotropic Gaussian node features with
//! orthogonal class means. Optional per-node Gaussian perturbation of the
//! neighborhood distribution models neighborhood inconsistency.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::{stream_rng, Stream};

/// Full generative specification of the model.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HsbmParams {
    /// Node count.
    pub n: usize,
    /// Class count.
    pub c: usize,
    /// Feature dimension. Class means are the first `c` standard basis
    /// directions scaled by `mean_scale`, so `d >= c` is required when
    /// features are sampled.
    pub d: usize,
    /// Class priors, length `c`, summing to 1.
    pub eta: Vec<f64>,
    /// Norm of each class mean.
    pub mean_scale: f64,
    /// Feature standard deviation.
    pub sigma: f64,
    /// Row-stochastic neighborhood-distribution matrix, `c x c`.
    pub mhat: Mat,
    /// Per-class mean in-degree, length `c`.
    pub dbar: Vec<f64>,
    /// Standard deviation of the per-node topological noise.
    pub delta: f64,
    /// Whether aggregation should include the node itself. Generation
    /// never emits self-edges; this only affects the aggregation step.
    pub self_loops: bool,
}

pub const ROW_SUM_TOL: f64 = 1e-12;

impl HsbmParams {
    /// Parameters with uniform priors, unit mean scale, and a shared mean
    /// degree; the caller supplies the neighborhood pattern.
    pub fn with_pattern(n: usize, d: usize, sigma: f64, dbar: f64, mhat: Mat) -> Self {
        let c = mhat.nrows();
        HsbmParams {
            n,
            c,
            d,
            eta: vec![1.0 / c as f64; c],
            mean_scale: 1.0,
            sigma,
            mhat,
            dbar: vec![dbar; c],
            delta: 0.0,
            self_loops: false,
        }
    }

    /// The synthetic-experiment defaults: n=1000, c=d=5, sigma=0.6,
    /// mean degree 25, equal priors.
    pub fn synthetic(mhat: Mat) -> Self {
        Self::with_pattern(1000, 5, 0.6, 25.0, mhat)
    }

    /// Distance between any two class means (orthogonal, equal norm).
    pub fn gamma(&self) -> f64 {
        self.mean_scale * std::f64::consts::SQRT_2
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 2 {
            return Err(Error::OutOfRange(format!("c = {} must be >= 2", self.c)));
        }
        if self.eta.len() != self.c || self.dbar.len() != self.c {
            return Err(Error::DimensionError(format!(
                "eta/dbar length must equal c = {}",
                self.c
            )));
        }
        if self.mhat.nrows() != self.c || self.mhat.ncols() != self.c {
            return Err(Error::DimensionError(format!(
                "mhat must be {c} x {c}",
                c = self.c
            )));
        }
        check_row_stochastic(&self.mhat, ROW_SUM_TOL)?;
        let eta_sum: f64 = self.eta.iter().sum();
        if (eta_sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::OutOfRange(format!("eta sums to {eta_sum}, not 1")));
        }
        if self.eta.iter().any(|&e| e <= 0.0) {
            return Err(Error::OutOfRange("all class priors must be > 0".into()));
        }
        if self
            .dbar
            .iter()
            .any(|&dk| dk <= 0.0 || dk >= self.n as f64)
        {
            return Err(Error::OutOfRange(
                "mean degrees must satisfy 0 < dbar_k < n".into(),
            ));
        }
        if self.sigma <= 0.0 {
            return Err(Error::OutOfRange("sigma must be > 0".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::OutOfRange("delta must be >= 0".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_row_stochastic(m: &Mat, tol: f64) -> Result<()> {
    for (i, row) in m.rows_iter().enumerate() {
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::OutOfRange(format!(
                "row {i} of the neighborhood matrix has a negative entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::OutOfRange(format!(
                "row {i} of the neighborhood matrix sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// One sampled instance of the model.
///
/// `neighbors[i]` lists the sources `j` of the incoming edges of node `i`
/// (`a_ij = 1`), sorted ascending. Features and the realized per-node
/// target distributions are absent on graphs loaded from label-only
/// bundles.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub n: usize,
    pub c: usize,
    pub labels: Vec<usize>,
    pub neighbors: Vec<Vec<u32>>,
    pub degrees: Vec<u32>,
    pub features: Option<Mat>,
    /// Realized (possibly noisy) target neighborhood distribution per node.
    pub node_dists: Option<Mat>,
    pub zero_degree_count: usize,
    /// Number of per-pair probabilities that had to be capped at 1 during
    /// noisy sampling.
    pub cap_hits: u64,
}

impl GraphSample {
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub fn class_members(&self) -> Vec<Vec<u32>> {
        let mut members = vec![Vec::new(); self.c];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i as u32);
        }
        members
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.c];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Edge-generation probabilities `m_kt` implied by the neighborhood
/// distributions, priors, and mean degrees: `m_kt = (dbar_k / n) *
/// mhat_kt / eta_t`.
pub fn derive_edge_probabilities(params: &HsbmParams) -> Result<Mat> {
    check_row_stochastic(&params.mhat, ROW_SUM_TOL)?;
    let c = params.c;
    let mut m = Mat::zeros(c, c);
    for k in 0..c {
        for t in 0..c {
            let p = params.dbar[k] / params.n as f64 * params.mhat[(k, t)] / params.eta[t];
            if p > 1.0 {
                return Err(Error::InfeasibleModel {
                    from: k,
                    to: t,
                    probability: p,
                });
            }
            m[(k, t)] = p;
        }
    }
    Ok(m)
}

/// i.i.d. class labels from the prior.
pub fn sample_labels(params: &HsbmParams, seed: u64) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(params.c);
    let mut acc = 0.0;
    for &e in &params.eta {
        acc += e;
        cumulative.push(acc);
    }
    let mut rng = stream_rng(seed, Stream::Labels, 0);
    (0..params.n)
        .map(|_| {
            let u: f64 = rng.random();
            cumulative
                .iter()
                .position(|&cu| u < cu)
                .unwrap_or(params.c - 1)
        })
        .collect()
}

/// Clip negative entries to zero and renormalize to sum 1. Falls back to
/// the unperturbed distribution if everything was clipped away.
fn project_to_simplex(perturbed: &[f64], fallback: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = perturbed.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    if sum <= 1e-12 {
        return fallback.to_vec();
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Sample the adjacency structure for the given labels.
///
/// With `delta = 0` each directed pair is an independent Bernoulli draw
/// with the class-pair probability. With `delta > 0` each node first
/// perturbs its class neighborhood distribution, projects it back to the
/// simplex, and draws its incoming edges per source class with
/// probability `dbar * mhat(i)_t / |C_t|` (capped at 1). Self-edges are
/// never generated.
pub fn sample_graph(params: &HsbmParams, labels: &[usize], seed: u64) -> Result<GraphSample> {
    assert_eq!(labels.len(), params.n);
    let edge_probs = derive_edge_probabilities(params)?;
    let c = params.c;

    let mut members = vec![Vec::<u32>::new(); c];
    let mut rank_in_class = vec![0u32; params.n];
    for (i, &l) in labels.iter().enumerate() {
        rank_in_class[i] = members[l].len() as u32;
        members[l].push(i as u32);
    }
    let class_sizes: Vec<usize> = members.iter().map(Vec::len).collect();

    // Per-node target distributions; the noise stream is only consumed
    // when delta > 0 so noiseless runs are unaffected by its existence.
    let node_dists: Vec<Vec<f64>> = if params.delta > 0.0 {
        (0..params.n)
            .map(|i| {
                let mut rng = stream_rng(seed, Stream::Noise, i as u64);
                let base = params.mhat.row(labels[i]);
                let perturbed: Vec<f64> = base
                    .iter()
                    .map(|&v| v + params.delta * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                project_to_simplex(&perturbed, base)
            })
            .collect()
    } else {
        labels.iter().map(|&l| params.mhat.row(l).to_vec()).collect()
    };

    let noisy = params.delta > 0.0;
    let per_node: Vec<(Vec<u32>, u64)> = (0..params.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Stream::Edges, i as u64);
            let mut incoming = Vec::new();
            let mut caps = 0u64;
            for t in 0..c {
                let own_class = labels[i] == t;
                let pool = class_sizes[t] - usize::from(own_class);
                if pool == 0 {
                    continue;
                }
                let mut p = if noisy {
                    params.dbar[labels[i]] * node_dists[i][t] / class_sizes[t] as f64
                } else {
                    edge_probs[(labels[i], t)]
                };
                if p > 1.0 {
                    p = 1.0;
                    caps += 1;
                }
                if p <= 0.0 {
                    continue;
                }
                let count = Binomial::new(pool as u64, p).unwrap().sample(&mut rng) as usize;
                if count == 0 {
                    continue;
                }
                let chosen = rand::seq::index::sample(&mut rng, pool, count);
                let own_rank = rank_in_class[i] as usize;
                for idx in chosen {
                    // Skip over the node's own slot within its class.
                    let idx = if own_class && idx >= own_rank { idx + 1 } else { idx };
                    incoming.push(members[t][idx]);
                }
            }
            incoming.sort_unstable();
            (incoming, caps)
        })
        .collect();

    let mut neighbors = Vec::with_capacity(params.n);
    let mut cap_hits = 0u64;
    for (inc, caps) in per_node {
        cap_hits += caps;
        neighbors.push(inc);
    }
    let degrees: Vec<u32> = neighbors.iter().map(|v| v.len() as u32).collect();
    let zero_degree_count = degrees.iter().filter(|&&d| d == 0).count();

    Ok(GraphSample {
        n: params.n,
        c,
        labels: labels.to_vec(),
        neighbors,
        degrees,
        features: None,
        node_dists: Some(Mat::from_rows(&node_dists)),
        zero_degree_count,
        cap_hits,
    })
}

/// Gaussian node features: row i is `mean_scale * e_{label(i)} + sigma * g`.
pub fn sample_features(params: &HsbmParams, labels: &[usize], seed: u64) -> Result<Mat> {
    if params.d < params.c {
        return Err(Error::DimensionError(format!(
            "feature dimension d = {} must be >= c = {}",
            params.d, params.c
        )));
    }
    let mut rng = stream_rng(seed, Stream::Features, 0);
    let mut features = Mat::zeros(params.n, params.d);
    for (i, &l) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = params.sigma * rng.sample::<f64, _>(StandardNormal);
        }
        row[l] += params.mean_scale;
    }
    Ok(features)
}

/// Sample a complete instance: labels, adjacency, and features.
pub fn sample(params: &HsbmParams, seed: u64) -> Result<GraphSample> {
    params.validate()?;
    let labels = sample_labels(params, seed);
    let mut graph = sample_graph(params, &labels, seed)?;
    graph.features = Some(sample_features(params, &labels, seed)?);
    Ok(graph)
}

/// The a-parameterized pattern family: diagonal `a`, super-diagonal `2a`
/// (wrapping at the last class), and the remaining mass split evenly.
pub fn pattern_family_a(a: f64, c: usize) -> Result<Mat> {
    if c < 3 {
        return Err(Error::OutOfRange("a-family needs c >= 3".into()));
    }
    let rest = (1.0 - 3.0 * a) / (c as f64 - 2.0);
    if a < 0.0 || rest < 0.0 {
        return Err(Error::OutOfRange(format!(
            "a = {a} leaves a negative entry in the a-family pattern"
        )));
    }
    let mut m = Mat::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            m[(i, j)] = if j == i {
                a
            } else if j == (i + 1) % c {
                2.0 * a
            } else {
                rest
            };
        }
    }
    Ok(m)
}

/// Homophilous family: diagonal `a1`, off-diagonal `(1 - a1) / (c - 1)`.
pub fn pattern_family_homophilous(a1: f64, c: usize) -> Result<Mat> {
    if !(0.0..=1.0).contains(&a1) {
        return Err(Error::OutOfRange(format!("a1 = {a1} must be in [0, 1]")));
    }
    let off = (1.0 - a1) / (c as f64 - 1.0);
    let mut m = Mat::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            m[(i, j)] = if i == j { a1 } else { off };
        }
    }
    Ok(m)
}

/// Group family over five classes: classes {0,1} and {2,3,4} form two
/// groups with similar intra-group neighborhood distributions.
pub fn pattern_family_group(a2: f64) -> Result<Mat> {
    if !(0.0..=0.2).contains(&a2) {
        return Err(Error::OutOfRange(format!("a2 = {a2} must be in [0, 0.2]")));
    }
    let a = a2;
    let b = a2 + 0.2;
    // Clamp rounding dust at the a2 = 0.2 boundary.
    let cc = ((0.8 - 2.0 * a2) / 3.0).max(0.0);
    let d = ((0.6 - 3.0 * a2) / 2.0).max(0.0);
    Ok(Mat::from_rows(&[
        vec![a, b, cc, cc, cc],
        vec![b, a, cc, cc, cc],
        vec![d, d, a, b, b],
        vec![d, d, b, a, b],
        vec![d, d, b, b, a],
    ]))
}
