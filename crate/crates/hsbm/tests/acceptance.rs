//! End-to-end acceptance checks. Each test covers one claim the library
//! makes about itself and prints a single pass line; tolerances are as
//! wide as the sampling noise of the stated configuration requires, no
//! wider.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use hsbm::aggregate::{aggregate_l, collapse_layer, AggregationConfig, Precision};
use hsbm::analyze;
use hsbm::classify::{
    bayes_aggregated, bayes_raw, bayes_to_linear, pearson, split_nodes, train_gcn, train_mlp,
    Classifier, TrainConfig,
};
use hsbm::io::{export_graph, load_graph};
use hsbm::mat::Mat;
use hsbm::model::{self, pattern_family_a, HsbmParams};
use hsbm::rng::{stream_rng, Stream};
use hsbm::sweep::{run_sweep, SweepKind, SweepSpec};
use hsbm::theory::{
    classify_pattern_banded, error_upper_bound, gain_multi_gc_approx, gain_noisy_gc,
    gain_single_gc, pairwise_accuracy_baseline, separability, std_normal_cdf,
    SeparabilityInputs, Verdict, VARSIGMA_SYNTHETIC,
};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn synthetic(a: f64) -> HsbmParams {
    HsbmParams::synthetic(pattern_family_a(a, 5).unwrap())
}

/// Mean test accuracies of the baseline net and the aggregated net over
/// the given seeds.
fn mean_accuracies(params: &HsbmParams, seeds: &[u64]) -> (f64, f64) {
    let cfg = TrainConfig::synthetic();
    let agg = AggregationConfig::layers(1);
    let mut mlp = 0.0;
    let mut gcn = 0.0;
    for &seed in seeds {
        let graph = model::sample(params, seed).unwrap();
        let split = split_nodes(params.n, seed);
        mlp += train_mlp(graph.features.as_ref().unwrap(), &graph.labels, &split, &cfg, seed)
            .unwrap()
            .metrics
            .accuracy;
        gcn += train_gcn(&graph, &cfg, &agg, seed).unwrap().metrics.accuracy;
    }
    (mlp / seeds.len() as f64, gcn / seeds.len() as f64)
}

#[test]
fn check_01_pattern_trichotomy_accuracy() {
    let start = Instant::now();
    // (a, expected aggregated accuracy, half-width)
    let cases = [(0.25, 89.0, 4.0), (0.20, 72.0, 4.0), (0.18, 60.0, 5.0)];
    for (a, gcn_center, gcn_band) in cases {
        let (mlp, gcn) = mean_accuracies(&synthetic(a), &SEEDS);
        assert!(
            (mlp - 71.0).abs() <= 4.0,
            "baseline accuracy {mlp:.2} outside 71 +- 4 at a={a}"
        );
        assert!(
            (gcn - gcn_center).abs() <= gcn_band,
            "aggregated accuracy {gcn:.2} outside {gcn_center} +- {gcn_band} at a={a}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.1}s, budget 120s");
    println!("PASS check 01: accuracy trichotomy across three patterns ({elapsed:.1}s)");
}

#[test]
fn check_02_analytic_verdicts() {
    let expected = [(0.25, Verdict::Good), (0.20, Verdict::Mixed), (0.18, Verdict::Bad)];
    for (a, verdict) in expected {
        let inputs = SeparabilityInputs::from_params(&synthetic(a));
        let report = gain_single_gc(&inputs, VARSIGMA_SYNTHETIC).unwrap();
        // Gains within 5% of the threshold count as boundary cases.
        let got = classify_pattern_banded(&report.gains, VARSIGMA_SYNTHETIC, 0.05);
        assert_eq!(got, verdict, "a={a}: expected {verdict}, got {got}");
    }
    println!("PASS check 02: good/mixed/bad verdicts at threshold 1.2");
}

#[test]
fn check_03_gain_confusion_correlation() {
    let spec = SweepSpec::default_for(SweepKind::PatternA);
    let rows = run_sweep(&spec).unwrap();
    let mut mean_r = 0.0;
    for &seed in &spec.seeds {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in rows.iter().filter(|r| r.seed == seed) {
            x.extend_from_slice(&row.pearson_x);
            y.extend_from_slice(&row.pearson_y);
        }
        let (r, degenerate) = pearson(&x, &y);
        assert!(!degenerate, "seed {seed}: degenerate correlation");
        mean_r += r / spec.seeds.len() as f64;
    }
    assert!(mean_r <= -0.5, "mean correlation {mean_r:.3} above -0.5");
    println!("PASS check 03: gain vs confusion correlation {mean_r:.3} <= -0.5");
}

#[test]
fn check_04_degree_scaling() {
    // Quadrupling every mean degree exactly doubles every gain.
    let base = synthetic(0.2);
    for factor in [4.0, 16.0] {
        let mut scaled = base.clone();
        for d in &mut scaled.dbar {
            *d *= factor;
        }
        let g0 = gain_single_gc(&SeparabilityInputs::from_params(&base), 1.0).unwrap();
        let g1 = gain_single_gc(&SeparabilityInputs::from_params(&scaled), 1.0).unwrap();
        for t in 0..5 {
            for k in 0..5 {
                if t == k {
                    continue;
                }
                let ratio = g1.gains[(t, k)] / g0.gains[(t, k)];
                assert!(
                    (ratio - factor.sqrt()).abs() < 1e-12,
                    "gain ratio {ratio} at factor {factor}"
                );
            }
        }
    }

    let mut sparse = base.clone();
    sparse.dbar = vec![5.0; 5];
    let mut dense = base;
    dense.dbar = vec![350.0; 5];
    let (_, gcn_sparse) = mean_accuracies(&sparse, &SEEDS);
    let (_, gcn_dense) = mean_accuracies(&dense, &SEEDS);
    assert!(
        gcn_dense - gcn_sparse >= 15.0,
        "dense {gcn_dense:.2} vs sparse {gcn_sparse:.2}: gap below 15 points"
    );
    println!(
        "PASS check 04: gains scale with sqrt degree; accuracy {gcn_sparse:.1} -> {gcn_dense:.1}"
    );
}

#[test]
fn check_05_noise_monotonicity() {
    let deltas = [0.0, 0.005, 0.01];
    let mut prev_gains: Option<Mat> = None;
    let mut prev_acc: Option<f64> = None;
    for &delta in &deltas {
        let mut params = synthetic(0.2);
        params.delta = delta;
        let report = gain_noisy_gc(&SeparabilityInputs::from_params(&params), 1.0).unwrap();
        if let Some(prev) = &prev_gains {
            for t in 0..5 {
                for k in 0..5 {
                    if t != k {
                        assert!(
                            report.gains[(t, k)] < prev[(t, k)],
                            "gain not strictly decreasing at delta={delta}, pair ({t},{k})"
                        );
                    }
                }
            }
        }
        prev_gains = Some(report.gains);

        let (_, gcn) = mean_accuracies(&params, &SEEDS);
        if let Some(prev) = prev_acc {
            assert!(
                gcn <= prev + 2.0,
                "accuracy {gcn:.2} rose above {prev:.2} + 2 at delta={delta}"
            );
        }
        prev_acc = Some(gcn);
    }
    println!("PASS check 05: noise shrinks gains exactly, accuracy non-increasing within 2 points");
}

#[test]
fn check_06_deep_gain_positivity_and_sum() {
    let start = Instant::now();
    let mut rng = stream_rng(606, Stream::Sweep, 0);
    let c = 5;
    let floor = (c as f64).sqrt() * 25.0 / (1000f64).ln();
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..c)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| -rng.random::<f64>().ln()).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / sum).collect()
            })
            .collect();
        let mut params = synthetic(0.2);
        params.mhat = Mat::from_rows(&rows);
        let inputs = SeparabilityInputs::from_params(&params);
        for l in 2..=50 {
            let report = gain_multi_gc_approx(&inputs, l, 1.0).unwrap();
            let mut total = 0.0;
            for t in 0..c {
                for k in 0..c {
                    if t != k {
                        assert!(report.gains[(t, k)] > 0.0, "non-positive gain at depth {l}");
                        total += report.gains[(t, k)];
                    }
                }
            }
            assert!(total >= floor, "gain sum {total:.3} below floor {floor:.3} at depth {l}");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.1}s, budget 10s");
    println!("PASS check 06: deep gains positive with sum floor on 100 random patterns ({elapsed:.1}s)");
}

#[test]
fn check_07_precision_collapse_bands() {
    let params = synthetic(0.25);
    let graph = model::sample(&params, 0).unwrap();
    let features = graph.features.as_ref().unwrap();
    let single = collapse_layer(&graph, features, &graph.labels, Precision::Single, 80, 0.999);
    let double = collapse_layer(&graph, features, &graph.labels, Precision::Double, 80, 0.999);
    assert!(single < double, "single {single} not below double {double}");
    assert!((12..=35).contains(&single), "single collapse {single} outside [12, 35]");
    assert!((35..=65).contains(&double), "double collapse {double} outside [35, 65]");
    println!("PASS check 07: spread collapse at layer {single} (f32) and {double} (f64)");
}

#[test]
fn check_08_bayes_linear_agreement() {
    let mut raw_params = synthetic(0.2);
    raw_params.eta = vec![0.3, 0.25, 0.2, 0.15, 0.1];
    let raw = bayes_raw(&raw_params);
    let raw_net = bayes_to_linear(&raw).unwrap();

    let mut agg_params = synthetic(0.25);
    agg_params.eta = vec![0.35, 0.3, 0.15, 0.1, 0.1];
    let agg = bayes_aggregated(&agg_params).unwrap();
    let agg_net = bayes_to_linear(&agg).unwrap();

    let mut rng = stream_rng(808, Stream::Features, 0);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..5)
            .map(|_| 0.2 + 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert_eq!(raw_net.predict(&x), raw.predict(&x), "raw disagreement at {x:?}");
        assert_eq!(agg_net.predict(&x), agg.predict(&x), "aggregated disagreement at {x:?}");
    }
    println!("PASS check 08: linear layers reproduce both closed-form rules on 10^4 inputs");
}

#[test]
fn check_09_baseline_accuracy_monte_carlo() {
    let sigma = 0.6;
    let mut rng = stream_rng(909, Stream::Features, 0);
    for ratio in [1.0, 2.0, 5.0] {
        let eta = vec![ratio / (ratio + 1.0), 1.0 / (ratio + 1.0)];
        let inputs = SeparabilityInputs {
            gamma: std::f64::consts::SQRT_2,
            sigma,
            eta: eta.clone(),
            dbar: vec![25.0, 25.0],
            delta: 0.0,
            mhat: Mat::identity(2),
            n: 1000,
        };
        let (e0, e1) = pairwise_accuracy_baseline(&inputs, 0, 1);

        // Two-class rule: <x, mu_k> + sigma^2 ln eta_k, means e_0 and e_1.
        let mut correct = [0usize; 2];
        let mut total = [0usize; 2];
        for _ in 0..100_000 {
            let class = usize::from(rng.random::<f64>() >= eta[0]);
            let x0 = f64::from(class == 0) + sigma * rng.sample::<f64, _>(StandardNormal);
            let x1 = f64::from(class == 1) + sigma * rng.sample::<f64, _>(StandardNormal);
            let s0 = x0 + sigma * sigma * eta[0].ln();
            let s1 = x1 + sigma * sigma * eta[1].ln();
            let pred = usize::from(s1 > s0);
            total[class] += 1;
            correct[class] += usize::from(pred == class);
        }
        let emp0 = correct[0] as f64 / total[0] as f64;
        let emp1 = correct[1] as f64 / total[1] as f64;
        assert!((emp0 - e0).abs() < 0.01, "ratio {ratio}: class 0 {emp0:.4} vs {e0:.4}");
        assert!((emp1 - e1).abs() < 0.01, "ratio {ratio}: class 1 {emp1:.4} vs {e1:.4}");
    }
    println!("PASS check 09: closed-form pairwise accuracy matches Monte Carlo at prior ratios 1, 2, 5");
}

#[test]
fn check_10_aggregated_accuracy_on_graph() {
    let mut params = synthetic(0.25);
    params.n = 5000;
    let graph = model::sample(&params, 0).unwrap();
    let agg = aggregate_l(
        &graph,
        graph.features.as_ref().unwrap(),
        &AggregationConfig::layers(1),
    );
    let bayes = bayes_aggregated(&params).unwrap();
    let dbar = params.dbar[0];
    let c = params.c;

    for t in 0..c {
        for k in (t + 1)..c {
            let mut correct = 0usize;
            let mut total = 0usize;
            for i in 0..graph.n {
                let label = graph.labels[i];
                if label != t && label != k {
                    continue;
                }
                total += 1;
                let st = bayes.score(agg.row(i), t);
                let sk = bayes.score(agg.row(i), k);
                let pred = if st >= sk { t } else { k };
                correct += usize::from(pred == label);
            }
            let empirical = correct as f64 / total as f64;

            // Predicted accuracy with the sampling-error factor made
            // explicit: at finite degree the realized neighbor-class
            // histogram adds multinomial variance along the pair
            // direction on top of the sigma^2 / dbar feature noise.
            let mut diff = vec![0.0; c];
            let mut dist_sq = 0.0;
            for (j, d) in diff.iter_mut().enumerate() {
                *d = params.mhat[(t, j)] - params.mhat[(k, j)];
                dist_sq += *d * *d;
            }
            let dist = dist_sq.sqrt();
            let unit: Vec<f64> = diff.iter().map(|v| v / dist).collect();
            let per_class = |class: usize| {
                let mut quad = 0.0;
                let mut dot = 0.0;
                for (j, &u) in unit.iter().enumerate() {
                    quad += u * u * params.mhat[(class, j)];
                    dot += u * params.mhat[(class, j)];
                }
                let comp_var = (quad - dot * dot) / dbar;
                let s_eff = (params.sigma * params.sigma / dbar + comp_var).sqrt();
                std_normal_cdf(dist / (2.0 * s_eff))
            };
            let predicted = 0.5 * (per_class(t) + per_class(k));
            assert!(
                (empirical - predicted).abs() <= 0.03,
                "pair ({t},{k}): empirical {empirical:.4} vs predicted {predicted:.4}"
            );
        }
    }
    println!("PASS check 10: per-pair aggregated accuracy matches the closed form within 0.03");
}

#[test]
fn check_11_error_bound_dominance() {
    let mut rng = stream_rng(111, Stream::Noise, 0);
    for instance in 0..20 {
        let mut params = synthetic(0.2);
        params.n = 5000;
        params.sigma = 0.3 + 0.6 * rng.random::<f64>();
        let raw_eta: Vec<f64> = (0..5).map(|_| 0.5 - rng.random::<f64>().ln()).collect();
        let sum: f64 = raw_eta.iter().sum();
        params.eta = raw_eta.into_iter().map(|v| v / sum).collect();

        let labels = model::sample_labels(&params, instance);
        let features = model::sample_features(&params, &labels, instance).unwrap();
        let bayes = bayes_raw(&params);
        let mut errors = 0usize;
        for (i, &lab) in labels.iter().enumerate() {
            errors += usize::from(bayes.predict(features.row(i)) != lab);
        }
        let empirical = errors as f64 / params.n as f64;

        let inputs = SeparabilityInputs::from_params(&params);
        let mut s = Mat::zeros(5, 5);
        for t in 0..5 {
            for k in (t + 1)..5 {
                let (et, ek) = pairwise_accuracy_baseline(&inputs, t, k);
                let v = separability(&inputs, t, k, et, ek);
                s[(t, k)] = v;
                s[(k, t)] = v;
            }
        }
        let bound = error_upper_bound(&s, &params.eta);
        assert!(
            empirical <= bound,
            "instance {instance}: error {empirical:.4} exceeds bound {bound:.4}"
        );
    }
    println!("PASS check 11: empirical error dominated by the pairwise bound on 20 instances");
}

#[test]
fn check_12_export_audit_recovery() {
    let mut params = synthetic(0.25);
    params.n = 5000;
    let graph = model::sample(&params, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_graph(&graph, Some(&params), dir.path()).unwrap();

    let (loaded, _) = load_graph(dir.path()).unwrap();
    let (_, stats) = analyze::audit(&loaded, VARSIGMA_SYNTHETIC).unwrap();
    for t in 0..5 {
        for k in 0..5 {
            let diff = (stats.empirical_mhat[t][k] - params.mhat[(t, k)]).abs();
            assert!(diff <= 0.02, "pattern entry ({t},{k}) off by {diff:.4}");
        }
        let rel = (stats.avg_degree_per_class[t] - 25.0).abs() / 25.0;
        assert!(rel <= 0.05, "class {t} degree off by {:.1}%", 100.0 * rel);
    }
    println!("PASS check 12: bundle audit recovers pattern within 0.02 and degrees within 5%");
}

#[test]
fn check_13_large_graph_smoke() {
    let start = Instant::now();
    let cfg = TrainConfig::synthetic();
    let agg = AggregationConfig::layers(1);
    let mut results = Vec::new();
    for a in [0.25, 0.18] {
        let mut params = synthetic(a);
        params.n = 100_000;
        let graph = model::sample(&params, 0).unwrap();
        let split = split_nodes(params.n, 0);
        let mlp = train_mlp(graph.features.as_ref().unwrap(), &graph.labels, &split, &cfg, 0)
            .unwrap()
            .metrics
            .accuracy;
        let gcn = train_gcn(&graph, &cfg, &agg, 0).unwrap().metrics.accuracy;
        results.push((mlp, gcn));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "took {elapsed:.1}s, budget 600s");
    let (mlp_good, gcn_good) = results[0];
    let (mlp_bad, gcn_bad) = results[1];
    assert!(gcn_good > mlp_good, "aggregation should help at a=0.25");
    assert!(gcn_bad < mlp_bad, "aggregation should hurt at a=0.18");
    println!(
        "PASS check 13: n=100k run in {elapsed:.0}s keeps the accuracy ordering \
         ({gcn_good:.1} > {mlp_good:.1} > {gcn_bad:.1})"
    );
}

#[test]
fn check_14_real_world_documented() {
    let readme = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../README.md"
    ))
    .expect("workspace README");
    assert!(
        readme.contains("not bundled"),
        "README must state that real-world datasets are not bundled"
    );
    assert!(
        readme.contains("audit"),
        "README must document the audit workflow for external graphs"
    );
    println!("PASS check 14: real-world reproduction limits documented in the README");
}
