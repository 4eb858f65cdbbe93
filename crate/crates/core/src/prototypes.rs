//! Data-independent class prototypes on the unit hypersphere.
//!
//! The solver spreads `C` unit vectors in `R^{d'}` by minimizing, for every
//! prototype, the cosine to its nearest neighbor:
//!
//! ```text
//! L(P) = (1/C) Σ_i max_j (P Pᵀ − 2I)_ij      subject to ‖P_i‖ = 1
//! ```
//!
//! The `−2I` shift keeps a row from selecting itself. Optimization is plain
//! projected (sub)gradient descent without momentum: step with a linearly
//! annealed learning rate, then re-normalize every row. The lowest-loss
//! iterate is returned.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, DenseMatrix, Rng};

/// Tolerance on prototype row norms.
pub const UNIT_TOL: f64 = 1e-9;

pub const DEFAULT_ITERS: usize = 2000;
pub const DEFAULT_LR: f64 = 0.1;

/// `C` unit-norm class anchors in `d'` dimensions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    matrix: DenseMatrix,
}

impl PrototypeSet {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() < 2 || matrix.cols() < 2 {
            return Err(Error::InvalidArgument(format!(
                "prototype set needs C >= 2 and dim >= 2, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        for r in 0..matrix.rows() {
            let n = matrix.row_norm(r);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "prototype {r} has norm {n}, expected 1"
                )));
            }
        }
        Ok(PrototypeSet { matrix })
    }

    pub fn num_classes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn row(&self, c: usize) -> &[f64] {
        self.matrix.row(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = PrototypeFile {
            num_classes: self.num_classes(),
            dim: self.dim(),
            rows: self.matrix.to_rows(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: PrototypeFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.into_set()
    }
}

/// On-disk prototype document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototypeFile {
    pub num_classes: usize,
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl PrototypeFile {
    pub fn into_set(self) -> Result<PrototypeSet> {
        if self.rows.len() != self.num_classes {
            return Err(Error::schema(
                "rows",
                format!("{} rows, expected num_classes = {}", self.rows.len(), self.num_classes),
            ));
        }
        if let Some(k) = self.rows.iter().position(|r| r.len() != self.dim) {
            return Err(Error::schema(format!("rows[{k}]"), format!("expected {} values", self.dim)));
        }
        let m = DenseMatrix::from_rows(&self.rows).map_err(|e| Error::schema("rows", e.to_string()))?;
        PrototypeSet::new(m).map_err(|e| Error::schema("rows", e.to_string()))
    }
}

/// For each row, the first column maximizing `(P Pᵀ − 2I)_ij`, and that value.
fn nearest(p: &DenseMatrix) -> Vec<(usize, f64)> {
    let c = p.rows();
    (0..c)
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            for j in 0..c {
                let mut s = dot(p.row(i), p.row(j));
                if i == j {
                    s -= 2.0;
                }
                if s > best.1 {
                    best = (j, s);
                }
            }
            best
        })
        .collect()
}

/// Mean over prototypes of the largest off-diagonal cosine.
pub fn separation_loss(p: &PrototypeSet) -> f64 {
    let picks = nearest(&p.matrix);
    picks.iter().map(|&(_, s)| s).sum::<f64>() / picks.len() as f64
}

/// Smallest pairwise cosine over `i < j`.
pub fn min_pairwise_cosine(p: &PrototypeSet) -> f64 {
    pairwise_cosines(p).into_iter().fold(f64::INFINITY, f64::min)
}

/// Largest pairwise cosine over `i < j` (the closest pair).
pub fn max_pairwise_cosine(p: &PrototypeSet) -> f64 {
    pairwise_cosines(p).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn pairwise_cosines(p: &PrototypeSet) -> Vec<f64> {
    let c = p.num_classes();
    let mut out = Vec::with_capacity(c * (c - 1) / 2);
    for i in 0..c {
        for j in i + 1..c {
            out.push(dot(p.row(i), p.row(j)));
        }
    }
    out
}

fn normalize_rows(m: &mut DenseMatrix) {
    for r in 0..m.rows() {
        let n = norm(m.row(r));
        for v in m.row_mut(r) {
            *v /= n;
        }
    }
}

/// Linearly annealed step: `lr · (1 − step / iters)`.
///
/// The row-wise max is nonsmooth, so a constant step keeps oscillating
/// around the optimum by a few degrees.
fn step_size(lr: f64, step: usize, iters: usize) -> f64 {
    lr * (1.0 - step as f64 / iters as f64)
}

/// Projected subgradient descent on [`separation_loss`].
///
/// Rows start as normalized standard Gaussians. Ties in the row-wise max go
/// to the lowest index. `lr` is the initial step, annealed linearly to zero
/// over `iters` steps.
pub fn solve_prototypes(
    num_classes: usize,
    dim: usize,
    iters: usize,
    lr: f64,
    rng: &mut Rng,
) -> Result<PrototypeSet> {
    if num_classes < 2 || dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "need C >= 2 and dim >= 2, got C = {num_classes}, dim = {dim}"
        )));
    }
    if iters == 0 || !(lr > 0.0) {
        return Err(Error::InvalidArgument("need iters >= 1 and lr > 0".into()));
    }

    let mut p = DenseMatrix::zeros(num_classes, dim);
    for v in p.data_mut() {
        *v = rng.normal();
    }
    for r in 0..num_classes {
        // a zero Gaussian draw has probability zero, but keep the row valid
        if norm(p.row(r)) == 0.0 {
            p.set(r, r % dim, 1.0);
        }
    }
    normalize_rows(&mut p);

    let scale = 1.0 / num_classes as f64;
    let mut best = p.clone();
    let mut best_loss = f64::INFINITY;
    for step in 0..=iters {
        let picks = nearest(&p);
        let loss = picks.iter().map(|&(_, s)| s).sum::<f64>() * scale;
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&p);
        }
        if step == iters {
            break;
        }
        let mut grad = DenseMatrix::zeros(num_classes, dim);
        for (i, &(j, _)) in picks.iter().enumerate() {
            // ∂(P_i·P_j)/∂P_i = P_j and ∂/∂P_j = P_i (2·P_i when i == j)
            for k in 0..dim {
                let gi = grad.get(i, k) + scale * p.get(j, k);
                grad.set(i, k, gi);
                let gj = grad.get(j, k) + scale * p.get(i, k);
                grad.set(j, k, gj);
            }
        }
        let step_lr = step_size(lr, step, iters);
        for (v, g) in p.data_mut().iter_mut().zip(grad.data()) {
            *v -= step_lr * g;
        }
        normalize_rows(&mut p);
    }
    PrototypeSet::new(best)
}
