use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Masks};
use crate::tensor::DenseMatrix;

/// On-disk graph document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub edges: Vec<[usize; 2]>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitsFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitsFile {
    #[serde(default)]
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
}

impl GraphFile {
    pub fn from_graph(g: &Graph) -> Self {
        let masks = g.masks();
        let splits = (!masks.is_empty()).then(|| SplitsFile {
            train: Masks::indices(&masks.train),
            val: Masks::indices(&masks.val),
            test: Masks::indices(&masks.test),
        });
        GraphFile {
            num_nodes: g.num_nodes(),
            num_features: g.num_features(),
            num_classes: g.num_classes(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            features: g.features().to_rows(),
            labels: g.labels().to_vec(),
            splits,
        }
    }

    /// Checks the document against the schema and builds a [`Graph`].
    pub fn into_graph(self) -> Result<Graph> {
        let n = self.num_nodes;
        if self.features.len() != n {
            return Err(Error::schema(
                "features",
                format!("{} rows, expected num_nodes = {n}", self.features.len()),
            ));
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != self.num_features {
                return Err(Error::schema(
                    format!("features[{i}]"),
                    format!("{} values, expected num_features = {}", row.len(), self.num_features),
                ));
            }
        }
        if self.labels.len() != n {
            return Err(Error::schema(
                "labels",
                format!("{} entries, expected num_nodes = {n}", self.labels.len()),
            ));
        }
        for (k, &[u, v]) in self.edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::schema(
                    format!("edges[{k}]"),
                    format!("[{u}, {v}] has an endpoint outside [0, {n})"),
                ));
            }
            if u >= v {
                return Err(Error::schema(format!("edges[{k}]"), format!("[{u}, {v}] must satisfy u < v")));
            }
        }
        let masks = match &self.splits {
            Some(s) => {
                for (name, ids) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
                    let mut sorted = ids.clone();
                    sorted.sort_unstable();
                    if sorted.windows(2).any(|w| w[0] == w[1]) {
                        return Err(Error::schema(format!("splits.{name}"), "duplicate node id"));
                    }
                }
                Masks::from_indices(n, &s.train, &s.val, &s.test)?
            }
            None => Masks::empty(n),
        };
        let flat: Vec<f64> = self.features.into_iter().flatten().collect();
        let features = DenseMatrix::from_vec(n, self.num_features, flat)
            .map_err(|e| Error::schema("features", e.to_string()))?;
        let edges = self.edges.into_iter().map(|[u, v]| (u, v)).collect();
        Graph::new(n, self.num_classes, edges, features, self.labels, masks)
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GraphFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    file.into_graph()
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&GraphFile::from_graph(g)).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
