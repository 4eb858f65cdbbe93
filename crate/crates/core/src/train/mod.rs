//! Training loop, multi-seed experiments, checkpoints and the propagation benchmark.

mod bench;
mod checkpoint;
mod config;
mod experiment;
mod trainer;

pub use bench::{bench_propagation, random_graph, BenchConfig, BenchRow, BenchTable};
pub use checkpoint::Checkpoint;
pub use config::{
    config_keys, is_config_key, OptimizerConfig, SplitConfig, SplitSource, TrainConfig, WEIGHT_DECAY_GRID,
};
pub use experiment::{mean_ci95, run_experiment, run_experiment_on, thread_budget, ExperimentSummary, THREADS_ENV};
pub use trainer::{
    accuracy, evaluate, evaluate_with, metrics_csv, resolve_prototypes, resolve_split, train, train_on,
    write_metrics_csv, EpochMetrics, RunResult, METRICS_HEADER,
};
