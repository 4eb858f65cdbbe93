use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    load_graph, propagation_upper_bound, renormalized_adjacency, sample_few_shot_split, Graph, Masks,
    SplitSpec,
};
use crate::loss::{global_bias, total_loss};
use crate::model::{backward, forward, init_params, predict, Hyper, ModelParams};
use crate::prototypes::{solve_prototypes, PrototypeSet};
use crate::tensor::{adam_step, AdamState, Rng, SparseMatrix};
use crate::train::checkpoint::Checkpoint;
use crate::train::config::{SplitSource, TrainConfig};

// sub-streams of the run seed
const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// One row of the per-epoch metrics stream.
///
/// Equality ignores `epoch_ms`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_cls: f64,
    pub loss_reg: f64,
    pub omega_size: usize,
    /// Global bias of the evaluation-mode representations after this epoch's update.
    pub global_bias: Option<f64>,
    pub val_acc: Option<f64>,
    pub epoch_ms: f64,
}

impl PartialEq for EpochMetrics {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.loss_total.to_bits() == other.loss_total.to_bits()
            && self.loss_cls.to_bits() == other.loss_cls.to_bits()
            && self.loss_reg.to_bits() == other.loss_reg.to_bits()
            && self.omega_size == other.omega_size
            && self.global_bias.map(f64::to_bits) == other.global_bias.map(f64::to_bits)
            && self.val_acc.map(f64::to_bits) == other.val_acc.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub final_global_bias: Option<f64>,
    #[serde(skip)]
    pub metrics: Vec<EpochMetrics>,
    #[serde(skip)]
    pub best_params: Option<ModelParams>,
}

/// Fraction of masked nodes whose nearest prototype matches their label.
pub fn evaluate(
    params: &ModelParams,
    graph: &Graph,
    protos: &PrototypeSet,
    hyper: &Hyper,
    mask: &[bool],
) -> Result<f64> {
    let p = renormalized_adjacency(graph);
    evaluate_with(params, graph, &p, protos, hyper, mask)
}

/// [`evaluate`] with a precomputed propagation operator.
pub fn evaluate_with(
    params: &ModelParams,
    graph: &Graph,
    p: &SparseMatrix,
    protos: &PrototypeSet,
    hyper: &Hyper,
    mask: &[bool],
) -> Result<f64> {
    // dropout is off, so the generator is never drawn from
    let cache = forward(params, graph, p, hyper, &mut Rng::new(0), false)?;
    let pred = predict(&cache.zk, protos)?;
    accuracy(&pred.labels, graph.labels(), mask)
}

pub fn accuracy(pred: &[usize], labels: &[Option<usize>], mask: &[bool]) -> Result<f64> {
    if mask.len() != labels.len() || pred.len() != labels.len() {
        return Err(Error::shape(
            "accuracy",
            format!("{} predictions, {} labels, {} mask entries", pred.len(), labels.len(), mask.len()),
        ));
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        let y = labels[i].ok_or_else(|| Error::InvalidArgument(format!("evaluated node {i} is unlabeled")))?;
        total += 1;
        correct += (pred[i] == y) as usize;
    }
    if total == 0 {
        return Err(Error::InvalidArgument("accuracy over an empty mask".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Prototypes for `cfg`: loaded from file, or solved from the `proto_*` settings.
pub fn resolve_prototypes(cfg: &TrainConfig, num_classes: usize) -> Result<PrototypeSet> {
    let protos = match &cfg.prototypes {
        Some(path) => PrototypeSet::load(path)?,
        None => solve_prototypes(
            num_classes,
            cfg.hyper.dim,
            cfg.proto_iters,
            cfg.proto_lr,
            &mut Rng::new(cfg.proto_seed),
        )?,
    };
    if protos.num_classes() != num_classes || protos.dim() != cfg.hyper.dim {
        return Err(Error::shape(
            "prototypes",
            format!(
                "{}x{} prototypes for {num_classes} classes and embedding dim {}",
                protos.num_classes(),
                protos.dim(),
                cfg.hyper.dim
            ),
        ));
    }
    Ok(protos)
}

/// The split a run with `cfg` trains on.
pub fn resolve_split(graph: &Graph, cfg: &TrainConfig) -> Result<Graph> {
    match cfg.split.source {
        SplitSource::File => {
            if Masks::count(&graph.masks().train) == 0 {
                return Err(Error::schema("splits.train", "split source is `file` but the graph has no training nodes"));
            }
            Ok(graph.clone())
        }
        SplitSource::Sampled => {
            let spec = SplitSpec {
                shots_per_class: cfg.split.shots,
                val_per_class: cfg.split.val_per_class,
                seed: cfg.seed,
            };
            graph.with_masks(sample_few_shot_split(graph, &spec)?)
        }
    }
}

/// Loads the graph and prototypes named in `cfg` and trains.
pub fn train(cfg: &TrainConfig) -> Result<RunResult> {
    cfg.validate()?;
    let path = cfg
        .graph
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("config has no `graph` path".into()))?;
    let graph = load_graph(path)?;
    let protos = resolve_prototypes(cfg, graph.num_classes())?;
    train_on(&graph, &protos, cfg)
}

/// Full-batch training with validation-based model selection.
///
/// Each epoch: forward with dropout, loss, backward, decoupled weight decay
/// on `w1`/`w2`, Adam. Validation accuracy is measured with dropout off after
/// the update; the best epoch (earliest on ties) supplies the test accuracy.
/// Without validation nodes the last epoch is kept.
pub fn train_on(graph: &Graph, protos: &PrototypeSet, cfg: &TrainConfig) -> Result<RunResult> {
    cfg.validate()?;
    if protos.num_classes() != graph.num_classes() || protos.dim() != cfg.hyper.dim {
        return Err(Error::shape(
            "train",
            format!(
                "{}x{} prototypes for {} classes, embedding dim {}",
                protos.num_classes(),
                protos.dim(),
                graph.num_classes(),
                cfg.hyper.dim
            ),
        ));
    }
    let graph = resolve_split(graph, cfg)?;
    let hyper = cfg.hyper;
    let masks = graph.masks().clone();
    let has_val = Masks::count(&masks.val) > 0;
    let has_test = Masks::count(&masks.test) > 0;
    let all_labeled = graph.all_labeled();

    let p = renormalized_adjacency(&graph);
    let bound = propagation_upper_bound(&p, hyper.k)?;

    let root = Rng::new(cfg.seed);
    let mut params = init_params(&hyper, graph.num_features(), &mut root.stream(INIT_STREAM));
    let mut dropout_rng = root.stream(DROPOUT_STREAM);
    let lr = cfg.optimizer.lr;
    let mut adam: Vec<AdamState> = params.tensors().iter().map(|t| AdamState::new(t.len(), lr)).collect();
    let decay = 1.0 - lr * cfg.optimizer.weight_decay;

    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, Option<f64>, ModelParams)> = None;
    let mut final_bias = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let cache = forward(&params, &graph, &p, &hyper, &mut dropout_rng, true)?;
        let (report, grad_zk) = total_loss(
            &cache.zk,
            protos,
            graph.labels(),
            &masks.train,
            &bound,
            &cfg.loss,
            epoch,
        )?;
        let grads = backward(&cache, &params, &p, &grad_zk, &hyper)?;

        for w in [params.w1.data_mut(), params.w2.data_mut()] {
            for v in w {
                *v *= decay;
            }
        }
        for ((tensor, grad), state) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut adam) {
            adam_step(tensor, grad, state)?;
        }
        if !params.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument(format!("parameters diverged at epoch {epoch}")));
        }

        let eval = forward(&params, &graph, &p, &hyper, &mut Rng::new(0), false)?;
        let pred = predict(&eval.zk, protos)?;
        let val_acc = if has_val {
            Some(accuracy(&pred.labels, graph.labels(), &masks.val)?)
        } else {
            None
        };
        let bias = if all_labeled {
            Some(global_bias(&eval.zk, protos, graph.labels())?)
        } else {
            None
        };
        final_bias = bias;

        let improved = match &best {
            None => true,
            Some((_, best_val, _)) => match (val_acc, best_val) {
                (Some(v), Some(b)) => v > *b,
                _ => !has_val,
            },
        };
        if improved {
            best = Some((epoch, val_acc, params.clone()));
        }

        metrics.push(EpochMetrics {
            epoch,
            loss_total: report.total,
            loss_cls: report.classification_loss,
            loss_reg: report.regularization,
            omega_size: report.omega_size,
            global_bias: bias,
            val_acc,
            epoch_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let (best_epoch, val_accuracy, best_params) = best.expect("at least one epoch");
    let test_accuracy = if has_test {
        Some(evaluate_with(&best_params, &graph, &p, protos, &hyper, &masks.test)?)
    } else {
        None
    };
    Ok(RunResult {
        seed: cfg.seed,
        best_epoch,
        val_accuracy,
        test_accuracy,
        final_global_bias: final_bias,
        metrics,
        best_params: Some(best_params),
    })
}

pub const METRICS_HEADER: &str = "epoch,loss_total,loss_cls,loss_reg,omega_size,global_bias,val_acc,epoch_ms";

/// Metrics CSV text. `epoch_ms` is written as `0` unless `timing` is set.
pub fn metrics_csv(rows: &[EpochMetrics], timing: bool) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let ms = if timing { format!("{:.3}", r.epoch_ms) } else { "0".to_string() };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.epoch,
            r.loss_total,
            r.loss_cls,
            r.loss_reg,
            r.omega_size,
            opt(r.global_bias),
            opt(r.val_acc),
            ms
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_metrics_csv(rows: &[EpochMetrics], timing: bool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, metrics_csv(rows, timing)).map_err(|e| Error::io(path, e))
}

impl RunResult {
    /// Checkpoint of the selected model.
    pub fn checkpoint(&self, hyper: &Hyper, protos: &PrototypeSet) -> Option<Checkpoint> {
        self.best_params
            .as_ref()
            .map(|params| Checkpoint::new(*hyper, params.clone(), protos.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sbm_generate, SbmParams};
    use crate::tensor::DenseMatrix;

    fn toy() -> (Graph, PrototypeSet) {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let masks = Masks::from_indices(2, &[0, 1], &[], &[]).unwrap();
        let g = Graph::new(2, 2, vec![(0, 1)], x, vec![Some(0), Some(1)], masks).unwrap();
        let protos = PrototypeSet::new(DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap()).unwrap();
        (g, protos)
    }

    fn toy_config() -> TrainConfig {
        let mut cfg = TrainConfig::default();
        cfg.epochs = 1;
        cfg.loss.lambda = 0.0;
        cfg.hyper.dim = 2;
        cfg.hyper.hidden = 4;
        cfg.split.source = SplitSource::File;
        cfg
    }

    #[test]
    fn one_epoch_smoke() {
        let (g, protos) = toy();
        let r = train_on(&g, &protos, &toy_config()).unwrap();
        assert_eq!(r.metrics.len(), 1);
        assert_eq!(r.best_epoch, 0);
        assert_eq!(r.val_accuracy, None);
        assert_eq!(r.test_accuracy, None);
        let csv = metrics_csv(&r.metrics, false);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(METRICS_HEADER));
    }

    #[test]
    fn accuracy_cases() {
        let labels = vec![Some(0), Some(1), Some(1), Some(0), Some(1)];
        let mask = vec![true; 5];
        assert_eq!(accuracy(&[0, 1, 1, 0, 1], &labels, &mask).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0, 0, 1, 0], &labels, &mask).unwrap(), 0.0);
        // hand count over nodes 0, 2, 3: correct at 0 and 3
        let partial = vec![true, false, true, true, false];
        assert_eq!(accuracy(&[0, 0, 0, 0, 0], &labels, &partial).unwrap(), 2.0 / 3.0);
        assert!(accuracy(&[0; 5], &labels, &[false; 5]).is_err());
    }

    #[test]
    fn deterministic_and_selects_best_epoch() {
        let g = sbm_generate(&SbmParams { nodes_per_class: 40, ..SbmParams::default() }, &mut Rng::new(1)).unwrap();
        let mut cfg = TrainConfig::default();
        cfg.epochs = 30;
        cfg.split.val_per_class = 10;
        cfg.hyper.dim = 8;
        cfg.hyper.hidden = 16;
        cfg.seed = 4;
        let protos = resolve_prototypes(&cfg, 3).unwrap();
        let a = train_on(&g, &protos, &cfg).unwrap();
        let b = train_on(&g, &protos, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(metrics_csv(&a.metrics, false), metrics_csv(&b.metrics, false));

        let best_val = a.metrics.iter().filter_map(|m| m.val_acc).fold(f64::NEG_INFINITY, f64::max);
        let first_best = a.metrics.iter().position(|m| m.val_acc == Some(best_val)).unwrap();
        assert_eq!(a.best_epoch, first_best);
        assert_eq!(a.val_accuracy, Some(best_val));

        let split = resolve_split(&g, &cfg).unwrap();
        let params = a.best_params.as_ref().unwrap();
        let test = evaluate(params, &split, &protos, &cfg.hyper, &split.masks().test).unwrap();
        assert_eq!(a.test_accuracy, Some(test));
        for (k, m) in a.metrics.iter().enumerate() {
            assert_eq!(m.epoch, k);
            if k < cfg.loss.warmup_epochs {
                assert_eq!(m.loss_reg, 0.0);
            }
        }
    }

    #[test]
    fn prototype_mismatch_is_an_error() {
        let (g, _) = toy();
        let wrong = solve_prototypes(3, 2, 10, 0.1, &mut Rng::new(0)).unwrap();
        assert!(train_on(&g, &wrong, &toy_config()).is_err());
    }

    #[test]
    fn file_split_requires_training_nodes() {
        let (g, protos) = toy();
        let bare = g.with_masks(Masks::empty(2)).unwrap();
        assert!(train_on(&bare, &protos, &toy_config()).is_err());
    }
}
