use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::SparseMatrix;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR form, with `D̃` the degree matrix of `A + I`.
///
/// Entry `(i, j)` is `1 / sqrt(d̃_i · d̃_j)`; the product of the two integer
/// degrees is formed first, so the matrix is bit-symmetric.
pub fn renormalized_adjacency(g: &Graph) -> SparseMatrix {
    let n = g.num_nodes();
    let adj = g.adjacency_lists();
    let deg: Vec<f64> = adj.iter().map(|nb| (nb.len() + 1) as f64).collect();

    let nnz = n + 2 * g.edges().len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_offsets.push(0);
    for (i, neighbors) in adj.iter().enumerate() {
        // merge the self-loop into the sorted neighbor list
        let mut self_done = false;
        for &j in neighbors {
            if !self_done && i < j {
                col_indices.push(i);
                values.push(1.0 / deg[i]);
                self_done = true;
            }
            col_indices.push(j);
            values.push(1.0 / (deg[i] * deg[j]).sqrt());
        }
        if !self_done {
            col_indices.push(i);
            values.push(1.0 / deg[i]);
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix::new(n, n, row_offsets, col_indices, values)
        .expect("renormalized adjacency is structurally valid")
}

/// Per-node norm bound `P^K · 1` for propagated unit-norm rows.
///
/// Returns the all-ones vector for `K = 0`.
pub fn propagation_upper_bound(p: &SparseMatrix, k: usize) -> Result<Vec<f64>> {
    if p.rows() != p.cols() {
        return Err(Error::shape(
            "propagation_upper_bound",
            format!("{}x{} operator is not square", p.rows(), p.cols()),
        ));
    }
    let mut b = vec![1.0; p.rows()];
    for _ in 0..k {
        b = p.mul_vec(&b)?;
    }
    Ok(b)
}
