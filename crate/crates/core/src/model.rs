//! Encode → normalize → propagate, and its adjoint.
//!
//! ```text
//! H    = relu(drop(X) W1 + b1) → drop → W2 + b2      (n × d')
//! Z⁰   = H_i / ‖H_i‖                                 (unit rows)
//! Zᴷ   = P^K Z⁰                                      (K sparse products)
//! ```
//!
//! `P` is symmetric, so the adjoint of propagation is `K` more products with `P`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::prototypes::PrototypeSet;
use crate::tensor::{
    cosine, dot, dropout_mask, row_l2_normalize, row_l2_normalize_backward, DenseMatrix, Rng,
    SparseMatrix, NORM_EPS,
};

/// Architecture and propagation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    /// Propagation steps.
    pub k: usize,
    pub hidden: usize,
    /// Embedding (prototype) dimension.
    pub dim: usize,
    pub dropout: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            k: 2,
            hidden: 64,
            dim: 32,
            dropout: 0.3,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("embedding dim {} < 2", self.dim)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Two-layer MLP encoder weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

/// Gradients with the same layout as [`ModelParams`].
pub type ParamGrads = ModelParams;

impl ModelParams {
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            w1: DenseMatrix::zeros(self.w1.rows(), self.w1.cols()),
            b1: vec![0.0; self.b1.len()],
            w2: DenseMatrix::zeros(self.w2.rows(), self.w2.cols()),
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    /// Tensors in a fixed order: `w1, b1, w2, b2`.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [self.w1.data(), &self.b1, self.w2.data(), &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.data_mut(), &mut self.b1, self.w2.data_mut(), &mut self.b2]
    }

    /// Checks internal consistency and agreement with `hyper`.
    pub fn check(&self, hyper: &Hyper) -> Result<()> {
        let ok = self.b1.len() == self.w1.cols()
            && self.w2.rows() == self.w1.cols()
            && self.b2.len() == self.w2.cols()
            && self.w1.cols() == hyper.hidden
            && self.w2.cols() == hyper.dim;
        if !ok {
            return Err(Error::shape(
                "model params",
                format!(
                    "w1 {:?}, b1 {}, w2 {:?}, b2 {} vs hidden {} dim {}",
                    self.w1.shape(),
                    self.b1.len(),
                    self.w2.shape(),
                    self.b2.len(),
                    hyper.hidden,
                    hyper.dim
                ),
            ));
        }
        if !self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Kaiming-uniform (fan-in) weights, zero biases.
pub fn init_params(hyper: &Hyper, input_dim: usize, rng: &mut Rng) -> ModelParams {
    let mut layer = |fan_in: usize, fan_out: usize| {
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut w = DenseMatrix::zeros(fan_in, fan_out);
        for v in w.data_mut() {
            *v = rng.uniform_range(-bound, bound);
        }
        w
    };
    let w1 = layer(input_dim, hyper.hidden);
    let w2 = layer(hyper.hidden, hyper.dim);
    ModelParams {
        w1,
        b1: vec![0.0; hyper.hidden],
        w2,
        b2: vec![0.0; hyper.dim],
    }
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input features after dropout.
    pub input: DenseMatrix,
    pub input_mask: Option<DenseMatrix>,
    /// Layer-1 pre-activation.
    pub pre1: DenseMatrix,
    /// Layer-1 activation after dropout (input of layer 2).
    pub hidden_in: DenseMatrix,
    pub hidden_mask: Option<DenseMatrix>,
    /// Encoder output `H`.
    pub h: DenseMatrix,
    /// Raw row norms of `H`.
    pub norms: Vec<f64>,
    pub z0: DenseMatrix,
    pub zk: DenseMatrix,
    pub k: usize,
}

pub fn forward(
    params: &ModelParams,
    g: &Graph,
    p: &SparseMatrix,
    hyper: &Hyper,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardCache> {
    forward_features(params, g.features(), p, hyper, rng, training)
}

/// [`forward`] on a bare feature matrix.
pub fn forward_features(
    params: &ModelParams,
    x: &DenseMatrix,
    p: &SparseMatrix,
    hyper: &Hyper,
    rng: &mut Rng,
    training: bool,
) -> Result<ForwardCache> {
    params.check(hyper)?;
    if x.cols() != params.input_dim() {
        return Err(Error::shape(
            "forward",
            format!("{} feature columns, W1 expects {}", x.cols(), params.input_dim()),
        ));
    }
    if p.rows() != x.rows() || p.cols() != x.rows() {
        return Err(Error::shape(
            "forward",
            format!("{}x{} operator for {} nodes", p.rows(), p.cols(), x.rows()),
        ));
    }
    let n = x.rows();
    let use_dropout = training && hyper.dropout > 0.0;

    let mut input = x.clone();
    let input_mask = if use_dropout {
        let m = dropout_mask(rng, hyper.dropout, n, x.cols())?;
        input.hadamard_assign(&m)?;
        Some(m)
    } else {
        None
    };

    let mut pre1 = input.matmul(&params.w1)?;
    pre1.add_row_vector(&params.b1)?;
    let mut hidden_in = pre1.clone();
    for v in hidden_in.data_mut() {
        *v = v.max(0.0);
    }
    let hidden_mask = if use_dropout {
        let m = dropout_mask(rng, hyper.dropout, n, hyper.hidden)?;
        hidden_in.hadamard_assign(&m)?;
        Some(m)
    } else {
        None
    };

    let mut h = hidden_in.matmul(&params.w2)?;
    h.add_row_vector(&params.b2)?;
    let (z0, norms) = row_l2_normalize(&h, NORM_EPS);
    let zk = p.spmm_power(&z0, hyper.k)?;

    Ok(ForwardCache {
        input,
        input_mask,
        pre1,
        hidden_in,
        hidden_mask,
        h,
        norms,
        z0,
        zk,
        k: hyper.k,
    })
}

/// Parameter gradients given `∂L/∂Zᴷ`.
pub fn backward(
    cache: &ForwardCache,
    params: &ModelParams,
    p: &SparseMatrix,
    grad_zk: &DenseMatrix,
    hyper: &Hyper,
) -> Result<ParamGrads> {
    params.check(hyper)?;
    if cache.k != hyper.k
        || grad_zk.shape() != cache.zk.shape()
        || cache.input.cols() != params.input_dim()
        || cache.h.cols() != params.output_dim()
    {
        return Err(Error::shape(
            "backward",
            format!(
                "cache (K={}, Zᴷ {:?}) does not match params/hyper (K={}) or gradient {:?}",
                cache.k,
                cache.zk.shape(),
                hyper.k,
                grad_zk.shape()
            ),
        ));
    }

    let grad_z0 = p.spmm_power(grad_zk, hyper.k)?;
    let grad_h = row_l2_normalize_backward(&grad_z0, &cache.h, &cache.norms, NORM_EPS)?;

    let w2 = cache.hidden_in.t_matmul(&grad_h)?;
    let b2 = grad_h.column_sums();
    let mut grad_hidden = grad_h.matmul_t(&params.w2)?;
    if let Some(m) = &cache.hidden_mask {
        grad_hidden.hadamard_assign(m)?;
    }
    for (g, &pre) in grad_hidden.data_mut().iter_mut().zip(cache.pre1.data()) {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }
    let w1 = cache.input.t_matmul(&grad_hidden)?;
    let b1 = grad_hidden.column_sums();
    Ok(ModelParams { w1, b1, w2, b2 })
}

/// Nearest-prototype labels by cosine similarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// Nodes whose representation was the zero vector; these are assigned class 0.
    pub zero_rows: Vec<usize>,
}

/// Per-row argmax of cosine to each prototype. Ties go to the lowest class index.
pub fn predict(zk: &DenseMatrix, protos: &PrototypeSet) -> Result<Prediction> {
    if zk.cols() != protos.dim() {
        return Err(Error::shape(
            "predict",
            format!("{} embedding columns, prototypes have {}", zk.cols(), protos.dim()),
        ));
    }
    let mut labels = Vec::with_capacity(zk.rows());
    let mut zero_rows = Vec::new();
    for i in 0..zk.rows() {
        let z = zk.row(i);
        if z.iter().all(|&v| v == 0.0) {
            labels.push(0);
            zero_rows.push(i);
            continue;
        }
        // prototypes are unit norm, so comparing dot products is comparing cosines
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..protos.num_classes() {
            let s = dot(z, protos.row(c));
            if s > best.1 {
                best = (c, s);
            }
        }
        labels.push(best.0);
    }
    Ok(Prediction { labels, zero_rows })
}

/// Cosine of row `i` of `zk` with prototype `c`; zero for a zero row.
pub fn cosine_to(zk: &DenseMatrix, protos: &PrototypeSet, i: usize, c: usize) -> f64 {
    cosine(zk.row(i), protos.row(c)).unwrap_or(0.0)
}
