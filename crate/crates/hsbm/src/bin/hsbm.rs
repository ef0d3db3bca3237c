//! Thin command-line front end; all behavior lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hsbm::aggregate::Precision;
use hsbm::cli::{
    build_sweep_spec, cmd_audit, cmd_gains, cmd_generate, cmd_sweep, cmd_train, exit_code,
    ModelFlags,
};
use hsbm::sweep::SweepKind;
use hsbm::Result;

#[derive(Parser)]
#[command(
    name = "hsbm",
    version,
    about = "Sample block-model graphs, compute separability gains, and train classifiers"
)]
struct Cli {
    /// Emit machine-readable JSON (including errors).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonModel {
    /// Node count.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Class count.
    #[arg(long, default_value_t = 5)]
    c: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// Feature standard deviation.
    #[arg(long, default_value_t = 0.6)]
    sigma: f64,
    /// Mean in-degree.
    #[arg(long, default_value_t = 25.0)]
    dbar: f64,
    /// Neighborhood-noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Neighborhood pattern: a=<v>, homophilous=<v>, group=<v>, or
    /// file=<path> (JSON rows).
    #[arg(long, default_value = "a=0.2")]
    pattern: String,
}

impl CommonModel {
    fn flags(&self) -> ModelFlags {
        ModelFlags {
            n: self.n,
            c: self.c,
            d: self.d,
            sigma: self.sigma,
            dbar: self.dbar,
            delta: self.delta,
            pattern: self.pattern.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a graph and write it as a file bundle.
    Generate {
        #[command(flatten)]
        model: CommonModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bundle directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the analytic separability-gain report for parameters.
    Gains {
        #[command(flatten)]
        model: CommonModel,
        /// Aggregation depth the gains refer to.
        #[arg(long, default_value_t = 1)]
        layers: u32,
        /// Threshold for the good/mixed/bad verdict.
        #[arg(long, default_value_t = 1.0)]
        varsigma: f64,
    },
    /// Empirical statistics and gain verdict for a graph bundle.
    Audit {
        /// Bundle directory.
        path: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        varsigma: f64,
    },
    /// Train the baseline and aggregated classifiers on a bundle.
    Train {
        /// Bundle directory.
        path: PathBuf,
        #[arg(long, default_value_t = 1)]
        layers: u32,
        #[arg(long, default_value = "double")]
        precision: Precision,
        /// Search the full hyperparameter grid instead of the reduced
        /// synthetic configuration.
        #[arg(long)]
        full_grid: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a parameter sweep and emit a CSV table.
    Sweep {
        /// JSON spec file; command-line flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// pattern_a | homophilous | group | degree | noise | layers.
        #[arg(long)]
        kind: Option<SweepKind>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        model: CommonModel,
        #[arg(long)]
        varsigma: Option<f64>,
        /// Precision tiers for layer sweeps.
        #[arg(long, value_delimiter = ',')]
        precision: Option<Vec<Precision>>,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Generate { model, seed, out } => {
            let summary = cmd_generate(&model.flags(), *seed, out)?;
            if cli.json {
                println!("{summary}");
            } else {
                println!(
                    "wrote bundle to {} ({} nodes, {} edges, {} isolated)",
                    summary["out"].as_str().unwrap_or_default(),
                    summary["n"],
                    summary["edges"],
                    summary["zero_degree"],
                );
            }
        }
        Cmd::Gains {
            model,
            layers,
            varsigma,
        } => {
            let report = cmd_gains(&model.flags(), *layers, *varsigma)?;
            if cli.json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!(
                    "kind {}  min gain {:.4}  max gain {:.4}  threshold {}  verdict {}",
                    report.kind, report.min_gain, report.max_gain, report.varsigma, report.verdict
                );
                for t in 0..report.c() {
                    let row: Vec<String> = (0..report.c())
                        .map(|k| format!("{:7.4}", report.gains[(t, k)]))
                        .collect();
                    println!("  {}", row.join(" "));
                }
            }
        }
        Cmd::Audit { path, varsigma } => {
            let report = cmd_audit(path, *varsigma)?;
            if cli.json {
                println!("{report}");
            } else {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
        Cmd::Train {
            path,
            layers,
            precision,
            full_grid,
            seed,
        } => {
            let metrics = cmd_train(path, *layers, *precision, *full_grid, *seed)?;
            if cli.json {
                println!("{metrics}");
            } else {
                println!(
                    "baseline {:.2}%  aggregated({} layer) {:.2}%",
                    metrics["mlp"]["accuracy"].as_f64().unwrap_or(f64::NAN),
                    metrics["layers"],
                    metrics["gcn"]["accuracy"].as_f64().unwrap_or(f64::NAN),
                );
            }
        }
        Cmd::Sweep {
            config,
            kind,
            grid,
            seeds,
            model,
            varsigma,
            precision,
            out,
        } => {
            // Base-model flags only take effect when explicitly given,
            // so a config file's parameters survive by default.
            let defaults = CommonModel {
                n: 1000,
                c: 5,
                d: 5,
                sigma: 0.6,
                dbar: 25.0,
                delta: 0.0,
                pattern: "a=0.2".into(),
            };
            let flags_set = model.n != defaults.n
                || model.c != defaults.c
                || model.d != defaults.d
                || model.sigma != defaults.sigma
                || model.dbar != defaults.dbar
                || model.delta != defaults.delta
                || model.pattern != defaults.pattern
                || config.is_none();
            let spec = build_sweep_spec(
                config.as_deref(),
                *kind,
                grid.clone(),
                seeds.clone(),
                &model.flags(),
                flags_set,
                *varsigma,
                precision.clone(),
                out.clone(),
            )?;
            cmd_sweep(&spec)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if cli.json {
                eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
