use crate::error::{Error, Result};
use crate::tensor::{dot, norm, DenseMatrix};

/// Guard used by the pipeline when normalizing embeddings.
pub const NORM_EPS: f64 = 1e-12;

/// Scales every row to unit L2 norm: `x_i / max(‖x_i‖, eps)`.
///
/// Returns the normalized matrix and the raw row norms. Zero rows stay zero.
pub fn row_l2_normalize(x: &DenseMatrix, eps: f64) -> (DenseMatrix, Vec<f64>) {
    assert!(eps > 0.0, "normalization eps must be positive");
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let n = norm(x.row(r));
        norms.push(n);
        let denom = n.max(eps);
        for v in out.row_mut(r) {
            *v /= denom;
        }
    }
    (out, norms)
}

/// Adjoint of [`row_l2_normalize`].
///
/// For a row with norm above `eps` the gradient is `(g - (g·ẑ)ẑ) / ‖x‖`.
/// Below `eps` the forward map is linear (`x / eps`) and so is its adjoint;
/// exactly-zero rows receive a zero gradient.
pub fn row_l2_normalize_backward(
    grad_out: &DenseMatrix,
    x: &DenseMatrix,
    norms: &[f64],
    eps: f64,
) -> Result<DenseMatrix> {
    if grad_out.shape() != x.shape() || norms.len() != x.rows() {
        return Err(Error::shape(
            "row_l2_normalize_backward",
            format!(
                "grad {:?}, input {:?}, {} norms",
                grad_out.shape(),
                x.shape(),
                norms.len()
            ),
        ));
    }
    let mut grad_in = DenseMatrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let n = norms[r];
        let g = grad_out.row(r);
        let out = grad_in.row_mut(r);
        if n == 0.0 {
            continue;
        }
        if n < eps {
            for (o, &gv) in out.iter_mut().zip(g) {
                *o = gv / eps;
            }
            continue;
        }
        let xr = x.row(r);
        // g·ẑ with ẑ = x / n
        let proj = dot(g, xr) / n;
        for ((o, &gv), &xv) in out.iter_mut().zip(g).zip(xr) {
            *o = (gv - proj * xv / n) / n;
        }
    }
    Ok(grad_in)
}
