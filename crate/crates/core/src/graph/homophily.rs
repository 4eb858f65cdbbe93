use crate::error::{Error, Result};
use crate::graph::Graph;

/// Mean fraction of same-label neighbors, over nodes with at least one neighbor.
///
/// Uses the raw adjacency (no self-loops). Every node must be labeled.
pub fn homophily(g: &Graph) -> Result<f64> {
    let labels = g.labels();
    if let Some(i) = labels.iter().position(Option::is_none) {
        return Err(Error::InvalidArgument(format!(
            "homophily needs every node labeled; node {i} is not"
        )));
    }
    let mut same = vec![0usize; g.num_nodes()];
    let mut total = vec![0usize; g.num_nodes()];
    for &(u, v) in g.edges() {
        total[u] += 1;
        total[v] += 1;
        if labels[u] == labels[v] {
            same[u] += 1;
            same[v] += 1;
        }
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (s, t) in same.iter().zip(&total) {
        if *t > 0 {
            sum += *s as f64 / *t as f64;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::InvalidArgument(
            "homophily is undefined when every node is isolated".into(),
        ));
    }
    Ok(sum / counted as f64)
}
