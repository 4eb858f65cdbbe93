use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Masks};
use crate::tensor::Rng;

/// Per-class few-shot split request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub shots_per_class: usize,
    pub val_per_class: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub const DEFAULT_VAL_PER_CLASS: usize = 30;

    pub fn new(shots_per_class: usize, seed: u64) -> Self {
        SplitSpec {
            shots_per_class,
            val_per_class: Self::DEFAULT_VAL_PER_CLASS,
            seed,
        }
    }
}

/// Draws `shots_per_class` training and `val_per_class` validation nodes per
/// class without replacement. Every other labeled node goes to test;
/// unlabeled nodes belong to no split.
pub fn sample_few_shot_split(g: &Graph, spec: &SplitSpec) -> Result<Masks> {
    if spec.shots_per_class == 0 {
        return Err(Error::InvalidArgument("shots_per_class must be at least 1".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); g.num_classes()];
    for (i, l) in g.labels().iter().enumerate() {
        if let Some(c) = *l {
            by_class[c].push(i);
        }
    }
    let need = spec.shots_per_class + spec.val_per_class;
    for (c, nodes) in by_class.iter().enumerate() {
        if nodes.len() <= need {
            return Err(Error::Infeasible(format!(
                "class {c} has {} labeled nodes; {} train + {} val leaves no test nodes",
                nodes.len(),
                spec.shots_per_class,
                spec.val_per_class
            )));
        }
    }

    let mut rng = Rng::new(spec.seed);
    let mut masks = Masks::empty(g.num_nodes());
    for nodes in &mut by_class {
        rng.shuffle(nodes);
        let (train, rest) = nodes.split_at(spec.shots_per_class);
        let (val, test) = rest.split_at(spec.val_per_class);
        for &i in train {
            masks.train[i] = true;
        }
        for &i in val {
            masks.val[i] = true;
        }
        for &i in test {
            masks.test[i] = true;
        }
    }
    Ok(masks)
}
