//! Closed-form separability analysis: how well a Bayes-optimal linear
//! rule can split two classes from raw Gaussian features, and how one or
//! more rounds of row-normalized neighborhood averaging rescale that
//! separation depending on the neighborhood pattern, the mean degree,
//! per-node neighborhood noise, and the depth.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mat::{euclidean_distance, Mat};
use crate::model::{GraphSample, HsbmParams};

/// Threshold used when quoting raw gain values.
pub const VARSIGMA_FORMULA: f64 = 1.0;
/// Threshold for verdicts on synthetic instances.
pub const VARSIGMA_SYNTHETIC: f64 = 1.2;
/// Threshold for verdicts on real-world graphs.
pub const VARSIGMA_REAL: f64 = 0.2;

/// Standard normal CDF, absolute error below 1e-12.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, Cody-style rational approximations.
fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        // erfc via erf on the central interval.
        const A: [f64; 5] = [
            3.161_123_743_870_565_6e0,
            1.138_641_541_510_501_6e2,
            3.774_852_376_853_02e2,
            3.209_377_589_138_469_4e3,
            1.857_777_061_846_031_5e-1,
        ];
        const B: [f64; 4] = [
            2.360_129_095_234_412_2e1,
            2.440_246_379_344_441_7e2,
            1.282_616_526_077_372_3e3,
            2.844_236_833_439_171e3,
        ];
        let z = if y > 1.11e-16 { y * y } else { 0.0 };
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        let erf = x * (num + A[3]) / (den + B[3]);
        return 1.0 - erf;
    } else if y <= 4.0 {
        const C: [f64; 9] = [
            5.641_884_969_886_701e-1,
            8.883_149_794_388_375,
            6.611_919_063_714_163e1,
            2.986_351_381_974_001e2,
            8.819_522_212_417_69e2,
            1.712_047_612_634_070_6e3,
            2.051_078_377_826_071_5e3,
            1.230_339_354_797_997_2e3,
            2.153_115_354_744_038_3e-8,
        ];
        const D: [f64; 8] = [
            1.574_492_611_070_983_5e1,
            1.176_939_508_913_125e2,
            5.371_811_018_620_099e2,
            1.621_389_574_566_690_2e3,
            3.290_799_235_733_459_6e3,
            4.362_619_090_143_247e3,
            3.439_367_674_143_721_6e3,
            1.230_339_354_803_749_4e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        exp_neg_sq(y) * (num + C[7]) / (den + D[7])
    } else if y < 26.6 {
        const SQRPI: f64 = 5.641_895_835_477_563e-1;
        const P: [f64; 6] = [
            3.053_266_349_612_323_4e-1,
            3.603_448_999_498_044_4e-1,
            1.257_817_261_112_292_6e-1,
            1.608_378_514_874_228e-2,
            6.587_491_615_298_378e-4,
            1.631_538_713_730_209_8e-2,
        ];
        const Q: [f64; 5] = [
            2.568_520_192_289_822,
            1.872_952_849_923_460_4e0,
            5.279_051_029_514_284e-1,
            6.051_834_131_244_132e-2,
            2.335_204_976_268_691_8e-3,
        ];
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        exp_neg_sq(y) * (SQRPI - r) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// exp(-y^2) split so the squared argument keeps full precision.
fn exp_neg_sq(y: f64) -> f64 {
    let hi = (y * 16.0).trunc() / 16.0;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

/// Everything the closed-form accuracy and gain expressions depend on.
#[derive(Debug, Clone)]
pub struct SeparabilityInputs {
    /// Distance between class means.
    pub gamma: f64,
    /// Feature standard deviation.
    pub sigma: f64,
    /// Class priors.
    pub eta: Vec<f64>,
    /// Per-class mean degrees.
    pub dbar: Vec<f64>,
    /// Neighborhood-noise standard deviation.
    pub delta: f64,
    /// Neighborhood-distribution matrix.
    pub mhat: Mat,
    /// Node count, entering only through log n.
    pub n: usize,
}

impl SeparabilityInputs {
    pub fn from_params(params: &HsbmParams) -> Self {
        SeparabilityInputs {
            gamma: params.gamma(),
            sigma: params.sigma,
            eta: params.eta.clone(),
            dbar: params.dbar.clone(),
            delta: params.delta,
            mhat: params.mhat.clone(),
            n: params.n,
        }
    }

    fn c(&self) -> usize {
        self.mhat.nrows()
    }

    fn mean_dbar(&self) -> f64 {
        self.dbar.iter().sum::<f64>() / self.dbar.len() as f64
    }

    fn check(&self) -> Result<()> {
        if self.gamma <= 0.0 || self.sigma <= 0.0 {
            return Err(Error::OutOfRange(
                "gamma and sigma must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Expected per-class accuracy of the Bayes rule restricted to classes
/// `t` and `k` on raw features, as `(E_t, E_k)`.
pub fn pairwise_accuracy_baseline(inp: &SeparabilityInputs, t: usize, k: usize) -> (f64, f64) {
    assert_ne!(t, k);
    let ratio = (inp.eta[t] / inp.eta[k]).ln();
    let base = inp.gamma / (2.0 * inp.sigma);
    let slope = inp.sigma / inp.gamma;
    (
        std_normal_cdf(base + slope * ratio),
        std_normal_cdf(base - slope * ratio),
    )
}

/// Same quantity after one aggregation step with pairwise gain `f`:
/// the mean separation is scaled by `f / varsigma`.
pub fn pairwise_accuracy_gained(
    inp: &SeparabilityInputs,
    f: f64,
    varsigma: f64,
    t: usize,
    k: usize,
) -> (f64, f64) {
    assert_ne!(t, k);
    let ratio = (inp.eta[t] / inp.eta[k]).ln();
    let scale = f / varsigma;
    let base = inp.gamma / (2.0 * inp.sigma) * scale;
    let slope = inp.sigma / inp.gamma / scale;
    (
        std_normal_cdf(base + slope * ratio),
        std_normal_cdf(base - slope * ratio),
    )
}

/// Prior-weighted mean of the two per-class accuracies.
pub fn separability(inp: &SeparabilityInputs, t: usize, k: usize, e_t: f64, e_k: f64) -> f64 {
    let w = inp.eta[t] + inp.eta[k];
    inp.eta[t] / w * e_t + inp.eta[k] / w * e_k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    Mixed,
    Bad,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Verdict::Good => "good",
            Verdict::Mixed => "mixed",
            Verdict::Bad => "bad",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    Baseline,
    SingleGc,
    NoisyGc,
    MultiGc(u32),
}

impl std::fmt::Display for GainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GainKind::Baseline => f.write_str("baseline"),
            GainKind::SingleGc => f.write_str("single_gc"),
            GainKind::NoisyGc => f.write_str("noisy_gc"),
            GainKind::MultiGc(l) => write!(f, "multi_gc({l})"),
        }
    }
}

impl std::str::FromStr for GainKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(GainKind::Baseline),
            "single_gc" => Ok(GainKind::SingleGc),
            "noisy_gc" => Ok(GainKind::NoisyGc),
            other => other
                .strip_prefix("multi_gc(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|l| l.parse().ok())
                .map(GainKind::MultiGc)
                .ok_or_else(|| format!("unknown gain kind {other:?}")),
        }
    }
}

/// Pairwise separability gains for one analysis, with the verdict they
/// imply at the recorded threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub kind: GainKind,
    /// Symmetric `c x c` matrix with zero diagonal.
    pub gains: Mat,
    pub varsigma: f64,
    pub verdict: Verdict,
    pub min_gain: f64,
    pub max_gain: f64,
}

impl GainReport {
    /// Derive the extrema and verdict from a filled gain matrix.
    pub fn from_gains(kind: GainKind, gains: Mat, varsigma: f64) -> Self {
        let c = gains.nrows();
        let mut min_gain = f64::INFINITY;
        let mut max_gain = f64::NEG_INFINITY;
        for t in 0..c {
            for k in 0..c {
                if t != k {
                    min_gain = min_gain.min(gains[(t, k)]);
                    max_gain = max_gain.max(gains[(t, k)]);
                }
            }
        }
        let verdict = classify_pattern(&gains, varsigma);
        GainReport {
            kind,
            gains,
            varsigma,
            verdict,
            min_gain,
            max_gain,
        }
    }

    pub fn c(&self) -> usize {
        self.gains.nrows()
    }
}

#[derive(Serialize, Deserialize)]
struct GainReportWire {
    kind: String,
    gains: Vec<Vec<f64>>,
    varsigma: f64,
    verdict: Verdict,
    min_gain: f64,
    max_gain: f64,
}

impl Serialize for GainReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GainReportWire {
            kind: self.kind.to_string(),
            gains: self.gains.rows_iter().map(<[f64]>::to_vec).collect(),
            varsigma: self.varsigma,
            verdict: self.verdict,
            min_gain: self.min_gain,
            max_gain: self.max_gain,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GainReport {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = GainReportWire::deserialize(d)?;
        let kind = wire.kind.parse().map_err(D::Error::custom)?;
        Ok(GainReport {
            kind,
            gains: Mat::from_rows(&wire.gains),
            varsigma: wire.varsigma,
            verdict: wire.verdict,
            min_gain: wire.min_gain,
            max_gain: wire.max_gain,
        })
    }
}

/// Verdict from the gain extrema: good when every pair clears the
/// threshold, bad when none does, mixed otherwise.
pub fn classify_pattern(gains: &Mat, varsigma: f64) -> Verdict {
    let c = gains.nrows();
    let mut min_gain = f64::INFINITY;
    let mut max_gain = f64::NEG_INFINITY;
    for t in 0..c {
        for k in 0..c {
            if t != k {
                min_gain = min_gain.min(gains[(t, k)]);
                max_gain = max_gain.max(gains[(t, k)]);
            }
        }
    }
    if min_gain > varsigma {
        Verdict::Good
    } else if max_gain < varsigma {
        Verdict::Bad
    } else {
        Verdict::Mixed
    }
}

/// Verdict with a relative boundary band around the threshold: a pattern
/// is only called good (bad) when every gain clears (misses) the
/// threshold by at least `band` relative margin. Gains inside the band
/// are boundary cases and force a mixed verdict. The threshold itself is
/// only known up to a vanishing correction, so exact comparisons against
/// it overstate confidence.
pub fn classify_pattern_banded(gains: &Mat, varsigma: f64, band: f64) -> Verdict {
    let strict = classify_pattern(gains, varsigma);
    match strict {
        Verdict::Good => {
            if classify_pattern(gains, varsigma * (1.0 + band)) == Verdict::Good {
                Verdict::Good
            } else {
                Verdict::Mixed
            }
        }
        Verdict::Bad => {
            if classify_pattern(gains, varsigma * (1.0 - band)) == Verdict::Bad {
                Verdict::Bad
            } else {
                Verdict::Mixed
            }
        }
        Verdict::Mixed => Verdict::Mixed,
    }
}

/// Gain of one aggregation step: the rescaling of the pairwise mean
/// separation, `F_tk = (1/sqrt 2) * ||sqrt(dbar_k) mhat_k - sqrt(dbar_t)
/// mhat_t||`.
pub fn gain_single_gc(inp: &SeparabilityInputs, varsigma: f64) -> Result<GainReport> {
    inp.check()?;
    let c = inp.c();
    let mut gains = Mat::zeros(c, c);
    for t in 0..c {
        for k in (t + 1)..c {
            let f = scaled_row_distance(inp, inp.dbar[t].sqrt(), inp.dbar[k].sqrt(), t, k);
            gains[(t, k)] = f;
            gains[(k, t)] = f;
        }
    }
    Ok(GainReport::from_gains(GainKind::SingleGc, gains, varsigma))
}

fn scaled_row_distance(
    inp: &SeparabilityInputs,
    scale_t: f64,
    scale_k: f64,
    t: usize,
    k: usize,
) -> f64 {
    let c = inp.c();
    let mut sq = 0.0;
    for j in 0..c {
        let d = scale_k * inp.mhat[(k, j)] - scale_t * inp.mhat[(t, j)];
        sq += d * d;
    }
    sq.sqrt() / std::f64::consts::SQRT_2
}

/// Relative spread of per-class mean degrees accepted by the noisy gain.
pub const DEGREE_SPREAD_TOL: f64 = 0.10;

/// Gain of one aggregation step when each node perturbs its neighborhood
/// distribution with independent noise of scale `delta`. The inverse
/// scale per class is `1/rho_t` with `rho_t^2 = gamma^2 delta^2 /
/// (2 sigma^2) + 1/dbar_t`; noise shrinks every gain toward zero, the
/// same effect as degrading the mean degree.
pub fn gain_noisy_gc(inp: &SeparabilityInputs, varsigma: f64) -> Result<GainReport> {
    inp.check()?;
    let mean = inp.mean_dbar();
    let spread = inp
        .dbar
        .iter()
        .map(|&d| (d - mean).abs())
        .fold(0.0, f64::max);
    if spread > DEGREE_SPREAD_TOL * mean {
        return Err(Error::AssumptionViolation(format!(
            "noisy gain assumes near-equal mean degrees; spread {:.3} exceeds {:.0}% of mean {mean:.3}",
            spread,
            DEGREE_SPREAD_TOL * 100.0
        )));
    }
    let noise_term = inp.gamma.powi(2) * inp.delta.powi(2) / (2.0 * inp.sigma.powi(2));
    let inv_rho: Vec<f64> = inp
        .dbar
        .iter()
        .map(|&d| 1.0 / (noise_term + 1.0 / d).sqrt())
        .collect();
    let c = inp.c();
    let mut gains = Mat::zeros(c, c);
    for t in 0..c {
        for k in (t + 1)..c {
            let f = scaled_row_distance(inp, inv_rho[t], inv_rho[k], t, k);
            gains[(t, k)] = f;
            gains[(k, t)] = f;
        }
    }
    Ok(GainReport::from_gains(GainKind::NoisyGc, gains, varsigma))
}

/// l-th power of a row-stochastic matrix, renormalized if rounding makes
/// a row sum drift by more than 1e-12.
pub fn mhat_power(mhat: &Mat, l: u32) -> Mat {
    let c = mhat.nrows();
    let mut out = Mat::identity(c);
    for _ in 0..l {
        out = out.matmul(mhat);
    }
    for i in 0..c {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 && sum > 0.0 {
            for v in row {
                *v /= sum;
            }
        }
    }
    out
}

/// Closed-form gain after `l` aggregation steps, using the normalized
/// pairwise distances of the l-hop neighborhood distributions:
/// `F = sqrt(c d_tk^2 / sum d^2) * dbar / ln n`. Valid for depth above
/// one; depth one falls back to the one-step formula with the mean
/// degree.
pub fn gain_multi_gc_approx(inp: &SeparabilityInputs, l: u32, varsigma: f64) -> Result<GainReport> {
    inp.check()?;
    if l <= 1 {
        let mut equal = inp.clone();
        let mean = inp.mean_dbar();
        equal.dbar = vec![mean; inp.dbar.len()];
        let report = gain_single_gc(&equal, varsigma)?;
        return Ok(GainReport::from_gains(
            GainKind::MultiGc(l),
            report.gains,
            varsigma,
        ));
    }
    let c = inp.c();
    // Row distances of the l-th pattern power, but computed by pushing
    // each row difference through the power directly. Subtracting the
    // powered rows instead would cancel: they converge to the same
    // stationary distribution while their true gap stays nonzero for
    // any nonsingular pattern.
    let mut dist_sq = Mat::zeros(c, c);
    let mut total = 0.0;
    for t in 0..c {
        for k in (t + 1)..c {
            let mut v = vec![0.0; c];
            v[t] = 1.0;
            v[k] = -1.0;
            for _ in 0..l {
                let mut next = vec![0.0; c];
                for (i, &vi) in v.iter().enumerate() {
                    if vi == 0.0 {
                        continue;
                    }
                    for (j, n) in next.iter_mut().enumerate() {
                        *n += vi * inp.mhat[(i, j)];
                    }
                }
                v = next;
            }
            let sq: f64 = v.iter().map(|&x| x * x).sum();
            dist_sq[(t, k)] = sq;
            dist_sq[(k, t)] = sq;
            total += 2.0 * sq;
        }
    }
    if total < 1e-300 {
        return Err(Error::DegeneratePattern);
    }
    let scale = inp.mean_dbar() / (inp.n as f64).ln();
    let mut gains = Mat::zeros(c, c);
    for t in 0..c {
        for k in 0..c {
            if t != k {
                gains[(t, k)] = (c as f64 * dist_sq[(t, k)] / total).sqrt() * scale;
            }
        }
    }
    Ok(GainReport::from_gains(GainKind::MultiGc(l), gains, varsigma))
}

/// Dense `n x n` matrix of l-step row-normalized walk probabilities.
/// Zero-degree rows keep their identity row.
fn walk_matrix(graph: &GraphSample, l: u32) -> Mat {
    use rayon::prelude::*;
    let n = graph.n;
    let mut s = Mat::identity(n);
    for _ in 0..l {
        let prev = s;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if graph.degrees[i] == 0 {
                    return prev.row(i).to_vec();
                }
                let mut acc = vec![0.0; n];
                for &j in &graph.neighbors[i] {
                    for (a, b) in acc.iter_mut().zip(prev.row(j as usize)) {
                        *a += b;
                    }
                }
                let inv = 1.0 / graph.degrees[i] as f64;
                for a in &mut acc {
                    *a *= inv;
                }
                acc
            })
            .collect();
        s = Mat::from_rows(&rows);
    }
    s
}

/// `sum_{i,j} ||S_i - S_j||^2` via the Gram identity
/// `2n sum_i ||S_i||^2 - 2 ||sum_i S_i||^2`.
pub fn q_frobenius_sq_gram(s: &Mat) -> f64 {
    let n = s.nrows();
    let mut norms = 0.0;
    let mut col_sums = vec![0.0; s.ncols()];
    for row in s.rows_iter() {
        for (acc, &v) in col_sums.iter_mut().zip(row) {
            norms += v * v;
            *acc += v;
        }
    }
    let total_sq: f64 = col_sums.iter().map(|&v| v * v).sum();
    2.0 * n as f64 * norms - 2.0 * total_sq
}

/// Same quantity by the direct pairwise loop; only for cross-checks on
/// small graphs.
pub fn q_frobenius_sq_pairwise(s: &Mat) -> f64 {
    let n = s.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = euclidean_distance(s.row(i), s.row(j));
            total += d * d;
        }
    }
    total
}

/// Class-averaged l-hop target-class distributions realized on a sampled
/// graph: row `k` is the mean over class-k nodes of their walk mass per
/// target class.
pub fn realized_hop_distributions(graph: &GraphSample, s: &Mat) -> Result<Mat> {
    let c = graph.c;
    let mut out = Mat::zeros(c, c);
    let counts = graph.class_counts();
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(k));
        }
    }
    for (i, row) in s.rows_iter().enumerate() {
        let k = graph.labels[i];
        for (j, &v) in row.iter().enumerate() {
            out[(k, graph.labels[j])] += v;
        }
    }
    for (k, &count) in counts.iter().enumerate() {
        for t in 0..c {
            out[(k, t)] /= count as f64;
        }
    }
    Ok(out)
}

/// Exact gain after `l` aggregation steps on a sampled graph:
/// `F = (n / ||Q||_F) * ||mhat_k^(l) - mhat_t^(l)||`, where `Q` is the
/// pairwise row-distance matrix of the walk matrix.
pub fn gain_multi_gc_exact(graph: &GraphSample, l: u32, varsigma: f64) -> Result<GainReport> {
    let s = walk_matrix(graph, l);
    let q_frob = q_frobenius_sq_gram(&s).max(0.0).sqrt();
    if q_frob < 1e-300 {
        return Err(Error::DegeneratePattern);
    }
    let hops = realized_hop_distributions(graph, &s)?;
    let c = graph.c;
    let scale = graph.n as f64 / q_frob;
    let mut gains = Mat::zeros(c, c);
    for t in 0..c {
        for k in (t + 1)..c {
            let f = scale * euclidean_distance(hops.row(t), hops.row(k));
            gains[(t, k)] = f;
            gains[(k, t)] = f;
        }
    }
    Ok(GainReport::from_gains(GainKind::MultiGc(l), gains, varsigma))
}

/// Upper bound on the overall Bayes error rate from the pairwise
/// separabilities: `sum_{t<k} (eta_t + eta_k)(1 - S_tk)`.
pub fn error_upper_bound(s: &Mat, eta: &[f64]) -> f64 {
    let c = s.nrows();
    let mut bound = 0.0;
    for t in 0..c {
        for k in (t + 1)..c {
            bound += (eta[t] + eta[k]) * (1.0 - s[(t, k)]);
        }
    }
    bound
}
