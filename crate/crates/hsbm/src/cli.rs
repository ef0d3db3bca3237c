//! Command implementations behind the `hsbm` binary: generate a graph
//! bundle, print analytic gains, audit a bundle, train the classifiers
//! on a bundle, and run parameter sweeps. The binary itself only parses
//! flags and maps errors to exit codes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::aggregate::{AggregationConfig, Precision};
use crate::analyze;
use crate::classify::{split_nodes, train_gcn, train_mlp, TrainConfig};
use crate::error::{Error, Result};
use crate::io::{export_graph, load_graph};
use crate::mat::Mat;
use crate::model::{
    self, pattern_family_a, pattern_family_group, pattern_family_homophilous, HsbmParams,
};
use crate::sweep::{run_sweep, write_csv, SweepKind, SweepSpec};
use crate::theory::{
    gain_multi_gc_approx, gain_noisy_gc, gain_single_gc, GainReport, SeparabilityInputs,
};

/// Parse a pattern argument: `a=<v>`, `homophilous=<v>`, `group=<v>`,
/// or `file=<path>` pointing at a JSON array of rows.
pub fn parse_pattern(arg: &str, c: usize) -> Result<Mat> {
    let (kind, value) = arg
        .split_once('=')
        .ok_or_else(|| Error::ConfigError(format!("pattern {arg:?} is not key=value")))?;
    let parse_num = || -> Result<f64> {
        value
            .parse()
            .map_err(|_| Error::ConfigError(format!("bad pattern value {value:?}")))
    };
    match kind {
        "a" => pattern_family_a(parse_num()?, c),
        "homophilous" => pattern_family_homophilous(parse_num()?, c),
        "group" => pattern_family_group(parse_num()?),
        "file" => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(&std::fs::read_to_string(value)?)?;
            let m = Mat::from_rows(&rows);
            if m.nrows() != c || m.ncols() != c {
                return Err(Error::ShapeError(format!(
                    "pattern file is {}x{}, expected {c}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            model::check_row_stochastic(&m, 1e-9)?;
            Ok(m)
        }
        other => Err(Error::ConfigError(format!("unknown pattern kind {other:?}"))),
    }
}

#[derive(Debug, Clone)]
pub struct ModelFlags {
    pub n: usize,
    pub c: usize,
    pub d: usize,
    pub sigma: f64,
    pub dbar: f64,
    pub delta: f64,
    pub pattern: String,
}

impl Default for ModelFlags {
    fn default() -> Self {
        ModelFlags {
            n: 1000,
            c: 5,
            d: 5,
            sigma: 0.6,
            dbar: 25.0,
            delta: 0.0,
            pattern: "a=0.2".into(),
        }
    }
}

impl ModelFlags {
    pub fn to_params(&self) -> Result<HsbmParams> {
        let mhat = parse_pattern(&self.pattern, self.c)?;
        let mut params = HsbmParams::with_pattern(self.n, self.d, self.sigma, self.dbar, mhat);
        params.delta = self.delta;
        params.validate()?;
        Ok(params)
    }
}

/// Sample a graph and write the bundle. Returns a JSON summary.
pub fn cmd_generate(flags: &ModelFlags, seed: u64, out: &Path) -> Result<serde_json::Value> {
    let params = flags.to_params()?;
    let graph = model::sample(&params, seed)?;
    export_graph(&graph, Some(&params), out)?;
    Ok(json!({
        "out": out.display().to_string(),
        "n": graph.n,
        "c": graph.c,
        "edges": graph.edge_count(),
        "zero_degree": graph.zero_degree_count,
        "cap_hits": graph.cap_hits,
        "seed": seed,
    }))
}

/// Analytic gain report for nominal parameters; the kind follows the
/// flags (depth above one, noise, or plain one-step).
pub fn cmd_gains(flags: &ModelFlags, layers: u32, varsigma: f64) -> Result<GainReport> {
    let params = flags.to_params()?;
    let inputs = SeparabilityInputs::from_params(&params);
    if layers > 1 {
        if params.delta != 0.0 {
            return Err(Error::ConfigError(
                "multi-step gains assume zero neighborhood noise".into(),
            ));
        }
        gain_multi_gc_approx(&inputs, layers, varsigma)
    } else if params.delta > 0.0 {
        gain_noisy_gc(&inputs, varsigma)
    } else {
        gain_single_gc(&inputs, varsigma)
    }
}

/// Load a bundle and report empirical statistics plus the gain verdict.
pub fn cmd_audit(path: &Path, varsigma: f64) -> Result<serde_json::Value> {
    let (graph, _) = load_graph(path)?;
    let (report, stats) = analyze::audit(&graph, varsigma)?;
    Ok(json!({
        "stats": stats,
        "gains": report,
    }))
}

/// Train the baseline and the aggregated classifier on a bundle.
pub fn cmd_train(
    path: &Path,
    layers: u32,
    precision: Precision,
    full_grid: bool,
    seed: u64,
) -> Result<serde_json::Value> {
    let (graph, _) = load_graph(path)?;
    let features = graph
        .features
        .as_ref()
        .ok_or_else(|| Error::ConfigError("bundle has no features to train on".into()))?;
    let cfg = if full_grid {
        TrainConfig::grid_search()
    } else {
        TrainConfig::synthetic()
    };
    let split = split_nodes(graph.n, seed);
    let mlp = train_mlp(features, &graph.labels, &split, &cfg, seed)?;
    let agg_cfg = AggregationConfig {
        layers,
        self_loops: false,
        precision,
    };
    let gcn = train_gcn(&graph, &cfg, &agg_cfg, seed)?;
    Ok(json!({
        "mlp": mlp.metrics,
        "gcn": gcn.metrics,
        "layers": layers,
    }))
}

/// Run a sweep and write its CSV to `out` or stdout.
pub fn cmd_sweep(spec: &SweepSpec) -> Result<()> {
    let rows = run_sweep(spec)?;
    match &spec.out {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            write_csv(&rows, &mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&rows, &mut stdout.lock())?;
        }
    }
    Ok(())
}

/// Build a sweep spec from an optional JSON config file plus overrides.
#[allow(clippy::too_many_arguments)]
pub fn build_sweep_spec(
    config: Option<&Path>,
    kind: Option<SweepKind>,
    grid: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    flags: &ModelFlags,
    flags_set: bool,
    varsigma: Option<f64>,
    precisions: Option<Vec<Precision>>,
    out: Option<PathBuf>,
) -> Result<SweepSpec> {
    let mut spec = match (config, kind) {
        (Some(path), _) => {
            let spec: SweepSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            spec
        }
        (None, Some(kind)) => SweepSpec::default_for(kind),
        (None, None) => {
            return Err(Error::ConfigError(
                "sweep needs either --config or --kind".into(),
            ))
        }
    };
    if let (Some(path), Some(kind)) = (config, kind) {
        let _ = path;
        spec.kind = kind;
    }
    if let Some(grid) = grid {
        spec.grid = grid;
    }
    if let Some(seeds) = seeds {
        spec.seeds = seeds;
    }
    if flags_set {
        spec.base = flags.to_params()?;
    }
    if let Some(v) = varsigma {
        spec.varsigma = v;
    }
    if let Some(p) = precisions {
        spec.precisions = p;
    }
    if out.is_some() {
        spec.out = out;
    }
    Ok(spec)
}

/// Process exit code for an error: 3 for an infeasible model, 4 for
/// I/O and parse failures, 2 for anything else (usage).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleModel { .. } => 3,
        Error::SweepPoint { source, .. } => exit_code(source),
        Error::Io(_) | Error::Json(_) | Error::ParseError { .. } | Error::ShapeError(_) => 4,
        _ => 2,
    }
}
