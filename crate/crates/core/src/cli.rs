//! Command-line front end.
//!
//! `train` and `experiment` accept any config field as a flag
//! (`--lambda 0`, `--hyper.k 3`) on top of an optional `--config` file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{homophily, load_graph, sample_few_shot_split, save_graph, sbm_generate, SbmParams, SplitSpec};
use crate::prototypes::{self, min_pairwise_cosine, solve_prototypes};
use crate::tensor::Rng;
use crate::train::{
    bench_propagation, evaluate, is_config_key, resolve_prototypes, run_experiment_on, thread_budget, train_on,
    write_metrics_csv, BenchConfig, Checkpoint, ExperimentSummary, TrainConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "normprop", about = "Graph semi-supervised learning with hyperspherical prototypes")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for well-separated unit class prototypes
    Prototypes {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = prototypes::DEFAULT_ITERS)]
        iters: usize,
        #[arg(long, default_value_t = prototypes::DEFAULT_LR)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a stochastic block model graph
    GenSbm {
        #[arg(long, default_value_t = 100)]
        nodes_per_class: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 0.05)]
        p_intra: f64,
        #[arg(long, default_value_t = 0.005)]
        p_inter: f64,
        #[arg(long, default_value_t = 16)]
        feature_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a few-shot train/val/test split into a graph file
    Split {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = SplitSpec::DEFAULT_VAL_PER_CLASS)]
        val_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model
    Train {
        #[command(flatten)]
        common: RunArgs,
        /// Write the best checkpoint here
        #[arg(long)]
        save_best: Option<PathBuf>,
        /// Per-epoch metrics CSV
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Accuracy of a saved checkpoint
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Which nodes to score
        #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
        mask: String,
    },
    /// Train over consecutive seeds and aggregate
    Experiment {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Directory for one metrics CSV per seed
        #[arg(long)]
        metrics_dir: Option<PathBuf>,
    },
    /// Time the propagation chain on random graphs
    Bench {
        #[arg(long, default_value_t = 10_000)]
        nodes: usize,
        #[arg(long, value_delimiter = ',', default_value = "25000,50000,100000")]
        edges: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the timing table as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Summary JSON
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record wall-clock epoch times in metrics
    #[arg(long)]
    timing: bool,
}

const RUN_FLAGS: &[&str] = &[
    "config",
    "summary",
    "timing",
    "save-best",
    "metrics",
    "runs",
    "base-seed",
    "metrics-dir",
    "help",
];

/// Pulls `--<config key> value` pairs out of a `train`/`experiment` command line.
fn split_overrides(args: &[String]) -> (Vec<String>, Vec<(String, String)>) {
    let is_run = args.get(1).is_some_and(|c| c == "train" || c == "experiment");
    if !is_run {
        return (args.to_vec(), Vec::new());
    }
    let mut rest = args[..2].to_vec();
    let mut overrides = Vec::new();
    let mut i = 2;
    while i < args.len() {
        let arg = &args[i];
        if let Some(flag) = arg.strip_prefix("--") {
            let (name, inline) = match flag.split_once('=') {
                Some((n, v)) => (n, Some(v.to_string())),
                None => (flag, None),
            };
            if !RUN_FLAGS.contains(&name) && is_config_key(name) {
                match inline {
                    Some(v) => overrides.push((name.to_string(), v)),
                    None if i + 1 < args.len() => {
                        overrides.push((name.to_string(), args[i + 1].clone()));
                        i += 1;
                    }
                    // missing value: leave it for clap to reject
                    None => rest.push(arg.clone()),
                }
                i += 1;
                continue;
            }
        }
        rest.push(arg.clone());
        i += 1;
    }
    (rest, overrides)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main(args: &[String]) -> i32 {
    let (rest, overrides) = split_overrides(args);
    let cli = match Cli::try_parse_from(&rest) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            if code == EXIT_OK {
                print!("{e}");
            } else {
                eprint!("{e}");
            }
            return code;
        }
    };
    match run(cli.command, &overrides) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::InvalidArgument(_)) {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn build_config(common: &RunArgs, overrides: &[(String, String)]) -> Result<TrainConfig> {
    let base = match &common.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    let mut cfg = base.with_overrides(overrides)?;
    if common.timing {
        cfg.record_timing = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(command: Command, overrides: &[(String, String)]) -> Result<()> {
    match command {
        Command::Prototypes {
            classes,
            dim,
            iters,
            lr,
            seed,
            out,
        } => {
            let p = solve_prototypes(classes, dim, iters, lr, &mut Rng::new(seed))?;
            p.save(&out)?;
            let min_cos = min_pairwise_cosine(&p);
            println!(
                "{}",
                json!({ "out": out, "num_classes": classes, "dim": dim, "min_angle_deg": min_cos.clamp(-1.0, 1.0).acos().to_degrees() })
            );
        }
        Command::GenSbm {
            nodes_per_class,
            classes,
            p_intra,
            p_inter,
            feature_dim,
            separation,
            noise,
            seed,
            out,
        } => {
            let params = SbmParams {
                nodes_per_class,
                num_classes: classes,
                p_intra,
                p_inter,
                feature_dim,
                class_mean_separation: separation,
                noise_sigma: noise,
            };
            let g = sbm_generate(&params, &mut Rng::new(seed))?;
            save_graph(&g, &out)?;
            println!(
                "{}",
                json!({ "out": out, "num_nodes": g.num_nodes(), "num_edges": g.edges().len(), "homophily": homophily(&g).ok() })
            );
        }
        Command::Split {
            graph,
            shots,
            val_per_class,
            seed,
            out,
        } => {
            let g = load_graph(&graph)?;
            let spec = SplitSpec {
                shots_per_class: shots,
                val_per_class,
                seed,
            };
            let g = g.with_masks(sample_few_shot_split(&g, &spec)?)?;
            save_graph(&g, &out)?;
            let m = g.masks();
            println!(
                "{}",
                json!({ "out": out, "train": m.train.iter().filter(|&&b| b).count(), "val": m.val.iter().filter(|&&b| b).count(), "test": m.test.iter().filter(|&&b| b).count() })
            );
        }
        Command::Train {
            common,
            save_best,
            metrics,
        } => {
            let cfg = build_config(&common, overrides)?;
            let graph = load_required_graph(&cfg)?;
            let protos = resolve_prototypes(&cfg, graph.num_classes())?;
            let result = train_on(&graph, &protos, &cfg)?;
            if let Some(path) = &metrics {
                write_metrics_csv(&result.metrics, cfg.record_timing, path)?;
            }
            if let Some(path) = &save_best {
                result
                    .checkpoint(&cfg.hyper, &protos)
                    .expect("training keeps the best parameters")
                    .save(path)?;
            }
            if let Some(path) = &common.summary {
                let summary = ExperimentSummary::from_runs(vec![result.clone()], cfg.hash())?;
                summary.save(path)?;
            }
            println!("{}", serde_json::to_string(&result).expect("result serializes"));
        }
        Command::Eval { checkpoint, graph, mask } => {
            let (hyper, params, protos) = Checkpoint::load(&checkpoint)?;
            let g = load_graph(&graph)?;
            if g.num_features() != params.input_dim() || g.num_classes() != protos.num_classes() {
                return Err(Error::Schema {
                    field: "num_features".into(),
                    message: format!(
                        "checkpoint expects {} features and {} classes, graph has {} and {}",
                        params.input_dim(),
                        protos.num_classes(),
                        g.num_features(),
                        g.num_classes()
                    ),
                });
            }
            let m = g.masks();
            let selected = match mask.as_str() {
                "train" => &m.train,
                "val" => &m.val,
                _ => &m.test,
            };
            let acc = evaluate(&params, &g, &protos, &hyper, selected)?;
            println!("{}", json!({ "mask": mask, "accuracy": acc }));
        }
        Command::Experiment {
            common,
            runs,
            base_seed,
            metrics_dir,
        } => {
            let cfg = build_config(&common, overrides)?;
            let graph = load_required_graph(&cfg)?;
            let protos = resolve_prototypes(&cfg, graph.num_classes())?;
            let summary = run_experiment_on(&graph, &protos, &cfg, runs, base_seed, thread_budget())?;
            if let Some(dir) = &metrics_dir {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                for r in &summary.runs {
                    write_metrics_csv(&r.metrics, cfg.record_timing, dir.join(format!("seed-{}.csv", r.seed)))?;
                }
            }
            if let Some(path) = &common.summary {
                summary.save(path)?;
            }
            println!(
                "{}",
                json!({ "num_runs": summary.num_runs, "mean_test_acc": summary.mean_test_acc, "ci95": summary.ci95, "config_hash": summary.config_hash })
            );
        }
        Command::Bench {
            nodes,
            edges,
            k,
            dim,
            repeats,
            seed,
            out,
        } => {
            let cfg = BenchConfig {
                num_nodes: nodes,
                edge_counts: edges,
                ks: k,
                dim,
                repeats,
                seed,
            };
            let table = bench_propagation(&cfg)?;
            print!("{}", table.render());
            let largest_k = cfg.ks.iter().copied().max().unwrap_or(0);
            for (a, b, r) in table.edge_ratios(largest_k) {
                println!("edges {a} -> {b} at K={largest_k}: x{r:.2}");
            }
            if let Some(&m) = cfg.edge_counts.iter().max() {
                for (a, b, r) in table.k_ratios(m) {
                    println!("K {a} -> {b} at {m} edges: x{r:.2}");
                }
            }
            if let Some(path) = &out {
                write_text(path, &serde_json::to_string_pretty(&table).expect("table serializes"))?;
            }
        }
    }
    Ok(())
}

fn load_required_graph(cfg: &TrainConfig) -> Result<crate::graph::Graph> {
    let path = cfg
        .graph
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("no graph given; pass --graph or set `graph` in the config".into()))?;
    load_graph(path)
}
