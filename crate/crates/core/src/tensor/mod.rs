//! Numeric substrate: dense and CSR kernels, row normalization, Adam,
//! seeded randomness and dropout. All arithmetic is `f64` with a fixed
//! accumulation order.

mod adam;
mod dense;
mod normalize;
mod rng;
mod sparse;

pub use adam::{adam_step, AdamState};
pub use dense::{cosine, dot, norm, DenseMatrix};
pub use normalize::{row_l2_normalize, row_l2_normalize_backward, NORM_EPS};
pub use rng::{dropout_mask, Rng};
pub use sparse::SparseMatrix;
