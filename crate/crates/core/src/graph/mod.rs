//! Graph data model and graph-level operations.

mod homophily;
mod io;
mod propagation;
mod sbm;
mod split;

pub use homophily::homophily;
pub use io::{load_graph, save_graph, GraphFile, SplitsFile};
pub use propagation::{propagation_upper_bound, renormalized_adjacency};
pub use sbm::{sbm_generate, SbmParams};
pub use split::{sample_few_shot_split, SplitSpec};

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

/// Train/validation/test membership, one flag per node.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Masks {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn from_indices(n: usize, train: &[usize], val: &[usize], test: &[usize]) -> Result<Self> {
        let mut masks = Masks::empty(n);
        for (name, ids, mask) in [
            ("train", train, &mut masks.train),
            ("val", val, &mut masks.val),
            ("test", test, &mut masks.test),
        ] {
            for (k, &i) in ids.iter().enumerate() {
                if i >= n {
                    return Err(Error::schema(
                        format!("splits.{name}[{k}]"),
                        format!("node {i} out of range for {n} nodes"),
                    ));
                }
                mask[i] = true;
            }
        }
        Ok(masks)
    }

    pub fn is_empty(&self) -> bool {
        !(self.train.iter().any(|&b| b) || self.val.iter().any(|&b| b) || self.test.iter().any(|&b| b))
    }

    pub fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&b| b).count()
    }
}

/// Undirected, unweighted attributed graph.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted, without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    num_classes: usize,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Vec<Option<usize>>,
    masks: Masks,
}

impl Graph {
    /// Validates and builds a graph. Edges may be given in either orientation;
    /// they are canonicalized to `u < v` and sorted. Duplicates and self-loops
    /// are rejected.
    pub fn new(
        num_nodes: usize,
        num_classes: usize,
        edges: Vec<(usize, usize)>,
        features: DenseMatrix,
        labels: Vec<Option<usize>>,
        masks: Masks,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::schema(
                "features",
                format!("{} rows for {num_nodes} nodes", features.rows()),
            ));
        }
        if labels.len() != num_nodes {
            return Err(Error::schema(
                "labels",
                format!("{} labels for {num_nodes} nodes", labels.len()),
            ));
        }
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = *l {
                if c >= num_classes {
                    return Err(Error::schema(
                        format!("labels[{i}]"),
                        format!("class {c} out of range for {num_classes} classes"),
                    ));
                }
            }
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::schema(
                    format!("edges[{k}]"),
                    format!("endpoint out of range in [{a}, {b}] for {num_nodes} nodes"),
                ));
            }
            if a == b {
                return Err(Error::schema(format!("edges[{k}]"), format!("self-loop on node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::schema(
                "edges",
                format!("duplicate edge [{}, {}]", w[0].0, w[0].1),
            ));
        }
        for (name, mask) in [("train", &masks.train), ("val", &masks.val), ("test", &masks.test)] {
            if !mask.is_empty() && mask.len() != num_nodes {
                return Err(Error::schema(
                    format!("splits.{name}"),
                    format!("mask of length {} for {num_nodes} nodes", mask.len()),
                ));
            }
        }
        let masks = Masks {
            train: pad(masks.train, num_nodes),
            val: pad(masks.val, num_nodes),
            test: pad(masks.test, num_nodes),
        };
        for i in 0..num_nodes {
            let hits = masks.train[i] as u8 + masks.val[i] as u8 + masks.test[i] as u8;
            if hits > 1 {
                return Err(Error::schema("splits", format!("node {i} appears in more than one split")));
            }
            if masks.train[i] && labels[i].is_none() {
                return Err(Error::schema("splits.train", format!("training node {i} is unlabeled")));
            }
        }
        Ok(Graph {
            num_nodes,
            num_classes,
            edges: canon,
            features,
            labels,
            masks,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    /// Same graph with different split masks (validated).
    pub fn with_masks(&self, masks: Masks) -> Result<Graph> {
        Graph::new(
            self.num_nodes,
            self.num_classes,
            self.edges.clone(),
            self.features.clone(),
            self.labels.clone(),
            masks,
        )
    }

    /// Sorted neighbor lists of the raw adjacency (no self-loops).
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn all_labeled(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }
}

fn pad(mask: Vec<bool>, n: usize) -> Vec<bool> {
    if mask.is_empty() {
        vec![false; n]
    } else {
        mask
    }
}
