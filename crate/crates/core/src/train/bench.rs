use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{renormalized_adjacency, Graph, Masks};
use crate::tensor::{row_l2_normalize, DenseMatrix, Rng, NORM_EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub num_nodes: usize,
    /// Edge counts to time; normally a doubling sequence.
    pub edge_counts: Vec<usize>,
    pub ks: Vec<usize>,
    pub dim: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            num_nodes: 10_000,
            edge_counts: vec![25_000, 50_000, 100_000],
            ks: vec![0, 1, 2, 4],
            dim: 32,
            repeats: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub k: usize,
    pub dim: usize,
    /// Fastest of the repeats, in seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    fn time(&self, edges: usize, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.num_edges == edges && r.k == k)
            .map(|r| r.seconds)
    }

    /// `(E, 2E, t(2E)/t(E))` for each consecutive pair of edge counts at fixed `k`.
    pub fn edge_ratios(&self, k: usize) -> Vec<(usize, usize, f64)> {
        let mut edges: Vec<usize> = self.rows.iter().filter(|r| r.k == k).map(|r| r.num_edges).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
            .windows(2)
            .filter_map(|w| Some((w[0], w[1], self.time(w[1], k)? / self.time(w[0], k)?)))
            .collect()
    }

    /// `(k, k', t(k')/t(k))` for each consecutive pair of nonzero step counts at fixed `edges`.
    pub fn k_ratios(&self, edges: usize) -> Vec<(usize, usize, f64)> {
        let mut ks: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.num_edges == edges && r.k > 0)
            .map(|r| r.k)
            .collect();
        ks.sort_unstable();
        ks.dedup();
        ks.windows(2)
            .filter_map(|w| Some((w[0], w[1], self.time(edges, w[1])? / self.time(edges, w[0])?)))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("nodes\tedges\tK\tdim\tms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.3}\n",
                r.num_nodes,
                r.num_edges,
                r.k,
                r.dim,
                r.seconds * 1e3
            ));
        }
        out
    }
}

/// Uniformly random simple graph with exactly `m` edges.
pub fn random_graph(n: usize, m: usize, dim: usize, rng: &mut Rng) -> Result<Graph> {
    if n < 2 || m > n * (n - 1) / 2 {
        return Err(Error::InvalidArgument(format!("cannot place {m} edges on {n} nodes")));
    }
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let (a, b) = (rng.below(n), rng.below(n));
        if a == b {
            continue;
        }
        let e = (a.min(b), a.max(b));
        if seen.insert(e) {
            edges.push(e);
        }
    }
    let features = DenseMatrix::from_vec(n, dim, (0..n * dim).map(|_| rng.normal()).collect())?;
    Graph::new(n, 1, edges, features, vec![None; n], Masks::empty(n))
}

/// Times the `K`-step sparse propagation chain over graphs of increasing size.
///
/// Repeats are interleaved across all (graph, `K`) cells and each cell keeps
/// its fastest time, so a transient slowdown cannot skew one ratio alone.
pub fn bench_propagation(cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.edge_counts.len() < 2 && cfg.ks.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sizes or two step counts".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut inputs = Vec::with_capacity(cfg.edge_counts.len());
    for &m in &cfg.edge_counts {
        let g = random_graph(cfg.num_nodes, m, cfg.dim, &mut rng)?;
        let (z0, _) = row_l2_normalize(g.features(), NORM_EPS);
        inputs.push((m, renormalized_adjacency(&g), z0));
    }
    let cells: Vec<(usize, usize)> = (0..inputs.len())
        .flat_map(|gi| cfg.ks.iter().map(move |&k| (gi, k)))
        .collect();
    let mut best = vec![f64::INFINITY; cells.len()];
    for _ in 0..cfg.repeats.max(1) {
        for (slot, &(gi, k)) in best.iter_mut().zip(&cells) {
            let (_, p, z0) = &inputs[gi];
            let mut z = z0.clone();
            let start = Instant::now();
            for _ in 0..k {
                z = p.spmm(&z)?;
            }
            *slot = slot.min(start.elapsed().as_secs_f64());
            std::hint::black_box(&z);
        }
    }
    let rows = cells
        .iter()
        .zip(best)
        .map(|(&(gi, k), seconds)| BenchRow {
            num_nodes: cfg.num_nodes,
            num_edges: inputs[gi].0,
            k,
            dim: cfg.dim,
            seconds,
        })
        .collect();
    Ok(BenchTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_graph_has_exact_edge_count() {
        let g = random_graph(50, 200, 3, &mut Rng::new(1)).unwrap();
        assert_eq!(g.edges().len(), 200);
        assert!(random_graph(4, 7, 1, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn zero_steps_cost_nothing() {
        let cfg = BenchConfig {
            num_nodes: 500,
            edge_counts: vec![1000, 2000],
            ks: vec![0, 2],
            dim: 8,
            repeats: 2,
            seed: 3,
        };
        let t = bench_propagation(&cfg).unwrap();
        assert_eq!(t.rows.len(), 4);
        for r in t.rows.iter().filter(|r| r.k == 0) {
            assert!(r.seconds < 1e-4, "{}", r.seconds);
        }
        assert_eq!(t.edge_ratios(2).len(), 1);
        assert_eq!(t.k_ratios(1000).len(), 0);
    }
}
