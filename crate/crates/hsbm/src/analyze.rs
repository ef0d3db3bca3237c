//! Empirical analysis of an arbitrary labeled graph: neighborhood
//! distribution and degree estimates, homophily ratio, a noise proxy,
//! and the gain-based pattern verdict computed from those estimates
//! instead of ground-truth parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::model::GraphSample;
use crate::theory::{gain_single_gc, GainReport, SeparabilityInputs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphStats {
    pub n: usize,
    pub c: usize,
    pub edge_count: usize,
    /// Node-averaged fraction of same-class neighbors, zero-degree
    /// nodes excluded.
    pub homophily_ratio: f64,
    pub avg_degree: f64,
    pub avg_degree_per_class: Vec<f64>,
    /// Row-major empirical neighborhood-distribution matrix.
    pub empirical_mhat: Vec<Vec<f64>>,
    /// Per-class spread of node-level neighborhood histograms, a proxy
    /// for the neighborhood-noise level.
    pub noise_std: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// Fraction of each node's neighbors sharing its class, averaged over
/// nodes with at least one neighbor.
pub fn homophily_ratio(graph: &GraphSample) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, sources) in graph.neighbors.iter().enumerate() {
        if sources.is_empty() {
            continue;
        }
        let intra = sources
            .iter()
            .filter(|&&j| graph.labels[j as usize] == graph.labels[i])
            .count();
        total += intra as f64 / sources.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

/// Per-node neighbor-class histogram normalized by degree; `None` for
/// zero-degree nodes.
fn node_histogram(graph: &GraphSample, i: usize) -> Option<Vec<f64>> {
    let sources = &graph.neighbors[i];
    if sources.is_empty() {
        return None;
    }
    let mut hist = vec![0.0; graph.c];
    for &j in sources {
        hist[graph.labels[j as usize]] += 1.0;
    }
    let inv = 1.0 / sources.len() as f64;
    for v in &mut hist {
        *v *= inv;
    }
    Some(hist)
}

/// Class-averaged neighborhood distributions and per-class mean
/// in-degrees. Zero-degree nodes are skipped in the distribution
/// average but counted in the degree average.
pub fn empirical_mhat(graph: &GraphSample) -> Result<(Mat, Vec<f64>)> {
    let c = graph.c;
    let counts = graph.class_counts();
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(k));
        }
    }
    let mut mhat = Mat::zeros(c, c);
    let mut used = vec![0usize; c];
    let mut degree_sum = vec![0.0; c];
    for i in 0..graph.n {
        let k = graph.labels[i];
        degree_sum[k] += graph.degrees[i] as f64;
        if let Some(hist) = node_histogram(graph, i) {
            used[k] += 1;
            for (t, &v) in hist.iter().enumerate() {
                mhat[(k, t)] += v;
            }
        }
    }
    for k in 0..c {
        if used[k] > 0 {
            for t in 0..c {
                mhat[(k, t)] /= used[k] as f64;
            }
        }
    }
    let degrees: Vec<f64> = degree_sum
        .iter()
        .zip(&counts)
        .map(|(&sum, &count)| sum / count as f64)
        .collect();
    Ok((mhat, degrees))
}

/// Per-class noise proxy: the mean over coordinates of the standard
/// deviation, across the class's nodes, of node-level neighborhood
/// histograms. Classes with fewer than two contributing nodes report 0.
pub fn estimate_noise(graph: &GraphSample) -> Result<Vec<f64>> {
    let c = graph.c;
    let counts = graph.class_counts();
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(k));
        }
    }
    let mut hists: Vec<Vec<Vec<f64>>> = vec![Vec::new(); c];
    for i in 0..graph.n {
        if let Some(hist) = node_histogram(graph, i) {
            hists[graph.labels[i]].push(hist);
        }
    }
    Ok(hists
        .iter()
        .map(|class_hists| {
            let m = class_hists.len();
            if m < 2 {
                return 0.0;
            }
            let mut acc = 0.0;
            for t in 0..c {
                let mean: f64 = class_hists.iter().map(|h| h[t]).sum::<f64>() / m as f64;
                let var: f64 = class_hists
                    .iter()
                    .map(|h| (h[t] - mean).powi(2))
                    .sum::<f64>()
                    / m as f64;
                acc += var.sqrt();
            }
            acc / c as f64
        })
        .collect())
}

/// Full empirical report: statistics plus the one-step gain verdict
/// computed from the empirical neighborhood matrix and per-class
/// degrees. `gamma` and `sigma` only shift the accuracy formulas, not
/// the gains, so nominal values are used.
pub fn audit(graph: &GraphSample, varsigma: f64) -> Result<(GainReport, GraphStats)> {
    let (mhat, degrees) = empirical_mhat(graph)?;
    let noise_std = estimate_noise(graph)?;
    let class_counts = graph.class_counts();
    let n = graph.n;
    let stats = GraphStats {
        n,
        c: graph.c,
        edge_count: graph.edge_count(),
        homophily_ratio: homophily_ratio(graph),
        avg_degree: graph.degrees.iter().map(|&d| d as f64).sum::<f64>() / n as f64,
        avg_degree_per_class: degrees.clone(),
        empirical_mhat: mhat.rows_iter().map(<[f64]>::to_vec).collect(),
        noise_std,
        class_counts: class_counts.clone(),
    };
    let eta: Vec<f64> = class_counts
        .iter()
        .map(|&count| count as f64 / n as f64)
        .collect();
    let inputs = SeparabilityInputs {
        gamma: std::f64::consts::SQRT_2,
        sigma: 1.0,
        eta,
        dbar: degrees,
        delta: 0.0,
        mhat,
        n,
    };
    let report = gain_single_gc(&inputs, varsigma)?;
    Ok((report, stats))
}
