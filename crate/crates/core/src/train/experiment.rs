use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{load_graph, Graph};
use crate::prototypes::PrototypeSet;
use crate::train::config::TrainConfig;
use crate::train::trainer::{resolve_prototypes, train_on, RunResult};

/// Environment variable capping how many runs execute concurrently.
pub const THREADS_ENV: &str = "NORMPROP_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub runs: Vec<RunResult>,
    pub num_runs: usize,
    pub mean_test_acc: f64,
    /// Sample standard deviation of per-run test accuracy.
    pub std_test_acc: f64,
    /// Half-width `1.96 · σ / √runs`.
    pub ci95: f64,
    pub config_hash: String,
}

impl ExperimentSummary {
    pub fn from_runs(runs: Vec<RunResult>, config_hash: String) -> Result<Self> {
        let accs: Vec<f64> = runs
            .iter()
            .map(|r| {
                r.test_accuracy
                    .ok_or_else(|| Error::InvalidArgument(format!("run with seed {} has no test nodes", r.seed)))
            })
            .collect::<Result<_>>()?;
        let (mean, std, ci95) = mean_ci95(&accs);
        Ok(ExperimentSummary {
            num_runs: runs.len(),
            runs,
            mean_test_acc: mean,
            std_test_acc: std,
            ci95,
            config_hash,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Mean, sample standard deviation and 95% half-width. One sample gives zero spread.
pub fn mean_ci95(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    (mean, std, 1.96 * std / (n as f64).sqrt())
}

/// Worker count from [`THREADS_ENV`], default 1.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or(1)
}

/// Trains with seeds `base_seed .. base_seed + num_runs` on an in-memory graph.
///
/// Results are ordered by seed regardless of how runs were scheduled.
pub fn run_experiment_on(
    graph: &Graph,
    protos: &PrototypeSet,
    cfg: &TrainConfig,
    num_runs: usize,
    base_seed: u64,
    threads: usize,
) -> Result<ExperimentSummary> {
    if num_runs == 0 {
        return Err(Error::InvalidArgument("num_runs must be at least 1".into()));
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..num_runs as u64).map(|k| base_seed + k).collect();
    let one = |seed: u64| {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = seed;
        train_on(graph, protos, &run_cfg)
    };
    let results: Vec<Result<RunResult>> = if threads <= 1 {
        seeds.iter().map(|&s| one(s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut hashed = cfg.clone();
    hashed.seed = base_seed;
    ExperimentSummary::from_runs(runs, hashed.hash())
}

/// Loads inputs from `cfg` and runs [`run_experiment_on`] with the
/// environment's thread budget.
pub fn run_experiment(cfg: &TrainConfig, num_runs: usize, base_seed: u64) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let path = cfg
        .graph
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config has no `graph` path".into()))?;
    let graph = load_graph(path)?;
    let protos = resolve_prototypes(cfg, graph.num_classes())?;
    run_experiment_on(&graph, &protos, cfg, num_runs, base_seed, thread_budget())
}
