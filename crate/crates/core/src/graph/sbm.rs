use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Masks};
use crate::tensor::{DenseMatrix, Rng};

/// Stochastic block model with Gaussian class-conditional features.
///
/// Class `c` has mean `class_mean_separation · e_c` in feature space, so
/// `feature_dim` must be at least `num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub nodes_per_class: usize,
    pub num_classes: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub feature_dim: usize,
    pub class_mean_separation: f64,
    pub noise_sigma: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            nodes_per_class: 100,
            num_classes: 3,
            p_intra: 0.05,
            p_inter: 0.005,
            feature_dim: 16,
            class_mean_separation: 1.0,
            noise_sigma: 1.0,
        }
    }
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_inter && self.p_inter <= self.p_intra && self.p_intra <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= p_inter ({}) <= p_intra ({}) <= 1",
                self.p_inter, self.p_intra
            )));
        }
        if self.num_classes == 0 || self.nodes_per_class == 0 {
            return Err(Error::InvalidArgument("SBM needs at least one class and one node per class".into()));
        }
        if self.feature_dim < self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "feature_dim {} is smaller than num_classes {}",
                self.feature_dim, self.num_classes
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.class_mean_separation.is_finite() {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0 and separation finite".into()));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Node `i` belongs to class `i / nodes_per_class`.
/// Split masks are left empty.
pub fn sbm_generate(params: &SbmParams, rng: &mut Rng) -> Result<Graph> {
    params.validate()?;
    let n = params.nodes_per_class * params.num_classes;
    let class_of = |i: usize| i / params.nodes_per_class;

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if class_of(u) == class_of(v) {
                params.p_intra
            } else {
                params.p_inter
            };
            if rng.uniform() < p {
                edges.push((u, v));
            }
        }
    }

    let d = params.feature_dim;
    let mut features = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let c = class_of(i);
        for (j, x) in features.row_mut(i).iter_mut().enumerate() {
            let mean = if j == c { params.class_mean_separation } else { 0.0 };
            *x = mean + params.noise_sigma * rng.normal();
        }
    }

    let labels = (0..n).map(|i| Some(class_of(i))).collect();
    Graph::new(n, params.num_classes, edges, features, labels, Masks::empty(n))
}
