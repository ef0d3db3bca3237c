//! Row-normalized neighborhood averaging, the only graph operation the
//! analysis needs: each node replaces its feature row with the mean of
//! its neighbors' rows. Repeated application can be run at three
//! arithmetic precisions so the depth at which the class structure
//! drops below the representable resolution can be measured.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::mat::{euclidean_distance, Mat};
use crate::model::GraphSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// ~7 significant digits (f32).
    Single,
    /// ~16 significant digits (f64).
    Double,
    /// >=30 significant digits, software-emulated.
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(format!("unknown precision {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AggregationConfig {
    pub layers: u32,
    pub self_loops: bool,
    pub precision: Precision,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            layers: 1,
            self_loops: false,
            precision: Precision::Double,
        }
    }
}

impl AggregationConfig {
    pub fn layers(layers: u32) -> Self {
        AggregationConfig {
            layers,
            ..Default::default()
        }
    }
}

/// Arithmetic the aggregation loop is generic over. Every intermediate
/// stays in this type; conversion to and from `f64` happens only at the
/// boundary.
trait AggScalar: Copy + Send + Sync {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    const ZERO: Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;
    fn recip(count: usize) -> Self;
}

impl AggScalar for f32 {
    fn from_f64(x: f64) -> f32 {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    const ZERO: f32 = 0.0;
    fn add(self, other: f32) -> f32 {
        self + other
    }
    fn sub(self, other: f32) -> f32 {
        self - other
    }
    fn mul(self, other: f32) -> f32 {
        self * other
    }
    fn recip(count: usize) -> f32 {
        1.0 / count as f32
    }
}

impl AggScalar for f64 {
    fn from_f64(x: f64) -> f64 {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    const ZERO: f64 = 0.0;
    fn add(self, other: f64) -> f64 {
        self + other
    }
    fn sub(self, other: f64) -> f64 {
        self - other
    }
    fn mul(self, other: f64) -> f64 {
        self * other
    }
    fn recip(count: usize) -> f64 {
        1.0 / count as f64
    }
}

impl AggScalar for DoubleDouble {
    fn from_f64(x: f64) -> DoubleDouble {
        DoubleDouble::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    const ZERO: DoubleDouble = DoubleDouble::ZERO;
    fn add(self, other: DoubleDouble) -> DoubleDouble {
        self + other
    }
    fn sub(self, other: DoubleDouble) -> DoubleDouble {
        self - other
    }
    fn mul(self, other: DoubleDouble) -> DoubleDouble {
        self * other
    }
    fn recip(count: usize) -> DoubleDouble {
        DoubleDouble::from_f64(1.0) / DoubleDouble::from_f64(count as f64)
    }
}

fn aggregate_generic<T: AggScalar>(
    graph: &GraphSample,
    features: &Mat,
    layers: u32,
    self_loops: bool,
) -> Mat {
    let n = graph.n;
    let d = features.ncols();
    assert_eq!(features.nrows(), n);
    let mut data: Vec<T> = features.as_slice().iter().map(|&v| T::from_f64(v)).collect();
    for _ in 0..layers {
        data = step_generic(graph, &data, d, self_loops);
    }
    Mat::from_vec(n, d, data.into_iter().map(T::to_f64).collect())
}

fn step_generic<T: AggScalar>(graph: &GraphSample, prev: &[T], d: usize, self_loops: bool) -> Vec<T> {
    let next: Vec<Vec<T>> = (0..graph.n)
        .into_par_iter()
        .map(|i| {
            let deg = graph.degrees[i] as usize;
            if deg == 0 && !self_loops {
                // Isolated node keeps its representation.
                return prev[i * d..(i + 1) * d].to_vec();
            }
            let mut acc = vec![T::ZERO; d];
            for &j in &graph.neighbors[i] {
                let row = &prev[j as usize * d..(j as usize + 1) * d];
                for (a, &b) in acc.iter_mut().zip(row) {
                    *a = a.add(b);
                }
            }
            let mut count = deg;
            if self_loops {
                count += 1;
                let own = &prev[i * d..(i + 1) * d];
                for (a, &b) in acc.iter_mut().zip(own) {
                    *a = a.add(b);
                }
            }
            let inv = T::recip(count);
            for a in &mut acc {
                *a = a.mul(inv);
            }
            acc
        })
        .collect();
    next.concat()
}

/// One averaging step at the configured precision.
pub fn aggregate_once(graph: &GraphSample, features: &Mat, config: &AggregationConfig) -> Mat {
    let mut one = *config;
    one.layers = 1;
    aggregate_l(graph, features, &one)
}

/// `config.layers` averaging steps, every intermediate held at the
/// configured precision.
pub fn aggregate_l(graph: &GraphSample, features: &Mat, config: &AggregationConfig) -> Mat {
    match config.precision {
        Precision::Single => aggregate_generic::<f32>(graph, features, config.layers, config.self_loops),
        Precision::Double => aggregate_generic::<f64>(graph, features, config.layers, config.self_loops),
        Precision::Extended => {
            aggregate_generic::<DoubleDouble>(graph, features, config.layers, config.self_loops)
        }
    }
}

/// How much structure is left in a feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    /// Mean over dimensions of the per-dimension standard deviation
    /// across nodes.
    pub avg_std: f64,
    /// Mean over class pairs of the distance between class means.
    pub avg_mean_distance: f64,
}

pub fn feature_spread_stats(features: &Mat, labels: &[usize]) -> SpreadStats {
    let n = features.nrows();
    let d = features.ncols();
    assert_eq!(labels.len(), n);
    let c = labels.iter().copied().max().map_or(0, |m| m + 1);

    let mut dim_mean = vec![0.0; d];
    for row in features.rows_iter() {
        for (m, &v) in dim_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut dim_mean {
        *m /= n as f64;
    }
    let mut dim_var = vec![0.0; d];
    for row in features.rows_iter() {
        for ((v, &m), &x) in dim_var.iter_mut().zip(&dim_mean).zip(row) {
            *v += (x - m) * (x - m);
        }
    }
    let avg_std = dim_var
        .iter()
        .map(|&v| (v / n as f64).sqrt())
        .sum::<f64>()
        / d as f64;

    let mut class_means = Mat::zeros(c, d);
    let mut counts = vec![0usize; c];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (acc, &v) in class_means.row_mut(l).iter_mut().zip(features.row(i)) {
            *acc += v;
        }
    }
    for (l, &count) in counts.iter().enumerate() {
        if count > 0 {
            for v in class_means.row_mut(l) {
                *v /= count as f64;
            }
        }
    }
    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for t in 0..c {
        for k in (t + 1)..c {
            if counts[t] > 0 && counts[k] > 0 {
                dist_sum += euclidean_distance(class_means.row(t), class_means.row(k));
                pairs += 1;
            }
        }
    }
    let avg_mean_distance = if pairs > 0 { dist_sum / pairs as f64 } else { 0.0 };
    SpreadStats {
        avg_std,
        avg_mean_distance,
    }
}

/// First layer index in `1..=max_layers` at which `avg_std` stops
/// shrinking by at least `factor` per step, i.e. where the decay has hit
/// the arithmetic's resolution floor. Returns `max_layers` if the decay
/// never stalls.
pub fn collapse_layer(
    graph: &GraphSample,
    features: &Mat,
    _labels: &[usize],
    precision: Precision,
    max_layers: u32,
    factor: f64,
) -> u32 {
    match precision {
        Precision::Single => collapse_layer_generic::<f32>(graph, features, max_layers, factor),
        Precision::Double => collapse_layer_generic::<f64>(graph, features, max_layers, factor),
        Precision::Extended => {
            collapse_layer_generic::<DoubleDouble>(graph, features, max_layers, factor)
        }
    }
}

// The whole chain, including the spread measurement, stays in T.
// Rounding intermediates (or deviations from the mean) to f64 would put
// every tier at the f64 floor.
fn collapse_layer_generic<T: AggScalar>(
    graph: &GraphSample,
    features: &Mat,
    max_layers: u32,
    factor: f64,
) -> u32 {
    let d = features.ncols();
    let mut data: Vec<T> = features.as_slice().iter().map(|&v| T::from_f64(v)).collect();
    let mut last_std = avg_std_generic(&data, graph.n, d);
    for l in 1..=max_layers {
        data = step_generic(graph, &data, d, false);
        let std = avg_std_generic(&data, graph.n, d);
        if std > last_std * factor {
            return l;
        }
        last_std = std;
    }
    max_layers
}

// Per-dimension variance accumulated in T; only the final variance is
// rounded to f64, which is safe since tiny magnitudes are representable.
fn avg_std_generic<T: AggScalar>(data: &[T], n: usize, d: usize) -> f64 {
    let inv_n = T::recip(n);
    let mut total = 0.0;
    for j in 0..d {
        let mut mean = T::ZERO;
        for i in 0..n {
            mean = mean.add(data[i * d + j]);
        }
        mean = mean.mul(inv_n);
        let mut var = T::ZERO;
        for i in 0..n {
            let dev = data[i * d + j].sub(mean);
            var = var.add(dev.mul(dev));
        }
        total += var.mul(inv_n).to_f64().sqrt();
    }
    total / d as f64
}
