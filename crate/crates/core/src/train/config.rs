use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::model::Hyper;
use crate::prototypes;

/// Weight-decay values swept for model selection.
pub const WEIGHT_DECAY_GRID: [f64; 6] = [1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    /// Decoupled decay on weight matrices (not biases).
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 0.01,
            weight_decay: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitSource {
    /// Fresh few-shot split drawn from the run seed.
    Sampled,
    /// Masks stored in the graph file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub source: SplitSource,
    pub shots: usize,
    pub val_per_class: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            source: SplitSource::Sampled,
            shots: 3,
            val_per_class: crate::graph::SplitSpec::DEFAULT_VAL_PER_CLASS,
        }
    }
}

/// Everything one training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub graph: Option<PathBuf>,
    /// Prototype file; when absent prototypes are solved from `proto_*`.
    pub prototypes: Option<PathBuf>,
    pub proto_seed: u64,
    pub proto_iters: usize,
    pub proto_lr: f64,
    pub hyper: Hyper,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub seed: u64,
    pub split: SplitConfig,
    /// Write wall-clock epoch times into the metrics CSV. Off by default so
    /// metrics files are byte-reproducible.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            graph: None,
            prototypes: None,
            proto_seed: 0,
            proto_iters: prototypes::DEFAULT_ITERS,
            proto_lr: prototypes::DEFAULT_LR,
            hyper: Hyper::default(),
            loss: LossConfig::default(),
            optimizer: OptimizerConfig::default(),
            epochs: 300,
            seed: 0,
            split: SplitConfig::default(),
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.loss.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(self.optimizer.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight_decay must be nonnegative".into()));
        }
        if self.split.source == SplitSource::Sampled && self.split.shots == 0 {
            return Err(Error::InvalidArgument("split.shots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Applies `key = raw` overrides to this config.
    ///
    /// A key is either a dotted path (`loss.lambda`) or a leaf name that
    /// occurs once in the schema (`lambda`); `-` and `_` are interchangeable.
    /// Values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for (key, raw) in overrides {
            let path = resolve_key(&doc, key)?;
            let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let slot = path
                .iter()
                .try_fold(&mut doc, |node, seg| node.get_mut(seg.as_str()))
                .expect("resolved path exists");
            *slot = value;
        }
        serde_json::from_value(doc).map_err(|e| Error::InvalidArgument(format!("config override: {e}")))
    }
}

/// Dotted paths of every leaf in the default config.
pub fn config_keys() -> Vec<Vec<String>> {
    let doc = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    let mut out = Vec::new();
    collect_leaves(&doc, &mut Vec::new(), &mut out);
    out
}

fn collect_leaves(v: &Value, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                prefix.push(k.clone());
                collect_leaves(child, prefix, out);
                prefix.pop();
            }
        }
        _ => out.push(prefix.clone()),
    }
}

/// True if `key` names a config field (see [`TrainConfig::with_overrides`]).
pub fn is_config_key(key: &str) -> bool {
    let doc = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    resolve_key(&doc, key).is_ok()
}

fn resolve_key(doc: &Value, key: &str) -> Result<Vec<String>> {
    let key = key.replace('-', "_");
    let mut leaves = Vec::new();
    collect_leaves(doc, &mut Vec::new(), &mut leaves);
    if key.contains('.') {
        let path: Vec<String> = key.split('.').map(str::to_owned).collect();
        return leaves
            .into_iter()
            .find(|p| *p == path)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown config key `{key}`")));
    }
    let matches: Vec<Vec<String>> = leaves
        .into_iter()
        .filter(|p| p.last().is_some_and(|l| *l == key))
        .collect();
    match matches.len() {
        1 => Ok(matches.into_iter().next().expect("one match")),
        0 => Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        _ => Err(Error::InvalidArgument(format!("ambiguous config key `{key}`; use a dotted path"))),
    }
}
