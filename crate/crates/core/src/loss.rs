//! Training signals and representation diagnostics.
//!
//! - classification loss: mean `1 − cos(Zᴷ_i, P_{y_i})` over labeled training nodes
//! - consistent metric: `ζ_i = ‖Zᴷ_i‖ / [P^K 1]_i ∈ [0, 1]`
//! - homophilous regularizer: `1 − mean_{i ∈ Ω_τ} ζ_i` over confident unlabeled nodes
//! - total: `L_c + λ·L_h` once warm-up is over, `L_c` before
//!
//! All gradients are with respect to `Zᴷ`. The confident set and the bound
//! vector are constants for differentiation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototypes::PrototypeSet;
use crate::tensor::{dot, norm, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda: f64,
    pub tau: f64,
    pub warmup_epochs: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 1.0,
            tau: 0.8,
            warmup_epochs: 10,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!("lambda {} outside [0, 2]", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!("tau {} outside [0, 1]", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub classification_loss: f64,
    pub regularization: f64,
    pub total: f64,
    pub omega_size: usize,
    /// `None` when some node is unlabeled.
    pub global_bias: Option<f64>,
}

fn check_rows(op: &'static str, zk: &DenseMatrix, n: usize, what: &str) -> Result<()> {
    if zk.rows() != n {
        return Err(Error::shape(op, format!("{} rows vs {n} {what}", zk.rows())));
    }
    Ok(())
}

/// Mean cosine loss over `train_mask` and its gradient with respect to `Zᴷ`.
///
/// Per masked row: `∂/∂z = −(P_y − cos·ẑ) / (‖z‖ · |Ω|)`. Zero rows count as
/// cosine 0 and get no gradient.
pub fn classification_loss(
    zk: &DenseMatrix,
    protos: &PrototypeSet,
    labels: &[Option<usize>],
    train_mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    check_rows("classification_loss", zk, labels.len(), "labels")?;
    check_rows("classification_loss", zk, train_mask.len(), "mask entries")?;
    if zk.cols() != protos.dim() {
        return Err(Error::shape(
            "classification_loss",
            format!("{} columns vs prototype dim {}", zk.cols(), protos.dim()),
        ));
    }
    let members: Vec<usize> = (0..zk.rows()).filter(|&i| train_mask[i]).collect();
    if members.is_empty() {
        return Err(Error::InvalidArgument("classification loss over an empty mask".into()));
    }
    let scale = 1.0 / members.len() as f64;
    let mut grad = DenseMatrix::zeros(zk.rows(), zk.cols());
    let mut loss = 0.0;
    for &i in &members {
        let y = labels[i].ok_or_else(|| {
            Error::InvalidArgument(format!("masked node {i} has no label"))
        })?;
        if y >= protos.num_classes() {
            return Err(Error::InvalidArgument(format!(
                "label {y} of node {i} has no prototype"
            )));
        }
        let z = zk.row(i);
        let proto = protos.row(y);
        let n = norm(z);
        if n == 0.0 {
            loss += 1.0;
            continue;
        }
        let cos = dot(z, proto) / n;
        loss += 1.0 - cos;
        for ((g, &p), &zv) in grad.row_mut(i).iter_mut().zip(proto).zip(z) {
            *g = -(p - cos * zv / n) / n * scale;
        }
    }
    Ok((loss * scale, grad))
}

/// Slack on the confidence threshold so that rows parallel to a prototype
/// pass `tau = 1` despite rounding in the cosine.
pub const COS_SLACK: f64 = 1e-12;

/// Nodes outside `exclude` whose best prototype cosine is at least `tau`
/// (up to [`COS_SLACK`]). Zero rows are never selected.
pub fn confident_set(zk: &DenseMatrix, protos: &PrototypeSet, tau: f64, exclude: &[bool]) -> Vec<usize> {
    (0..zk.rows())
        .filter(|&i| !exclude.get(i).copied().unwrap_or(false))
        .filter(|&i| {
            let z = zk.row(i);
            let n = norm(z);
            if n == 0.0 {
                return false;
            }
            let best = (0..protos.num_classes())
                .map(|c| dot(z, protos.row(c)))
                .fold(f64::NEG_INFINITY, f64::max);
            best / n >= tau - COS_SLACK
        })
        .collect()
}

/// `ζ_i = ‖Zᴷ_i‖ / bound_i`.
pub fn consistent_metric(zk: &DenseMatrix, bound: &[f64]) -> Result<Vec<f64>> {
    check_rows("consistent_metric", zk, bound.len(), "bound entries")?;
    if let Some(i) = bound.iter().position(|&b| !(b > 0.0)) {
        return Err(Error::InvalidArgument(format!("bound[{i}] = {} is not positive", bound[i])));
    }
    Ok((0..zk.rows()).map(|i| zk.row_norm(i) / bound[i]).collect())
}

/// `1 − mean_{i ∈ Ω} ζ_i` and its gradient; zero with zero gradient when `Ω` is empty.
pub fn homophilous_regularization(
    zk: &DenseMatrix,
    bound: &[f64],
    omega: &[usize],
) -> Result<(f64, DenseMatrix)> {
    let zeta = consistent_metric(zk, bound)?;
    let mut grad = DenseMatrix::zeros(zk.rows(), zk.cols());
    if omega.is_empty() {
        return Ok((0.0, grad));
    }
    if let Some(&i) = omega.iter().find(|&&i| i >= zk.rows()) {
        return Err(Error::InvalidArgument(format!("omega member {i} out of range")));
    }
    let scale = 1.0 / omega.len() as f64;
    let mut sum = 0.0;
    for &i in omega {
        sum += zeta[i];
        let z = zk.row(i);
        let n = norm(z);
        if n == 0.0 {
            continue;
        }
        let coeff = -scale / (bound[i] * n);
        for (g, &zv) in grad.row_mut(i).iter_mut().zip(z) {
            *g += coeff * zv;
        }
    }
    Ok((1.0 - sum * scale, grad))
}

/// Mean `1 − cos(Zᴷ_i, P_{y_i})` over every node. Fails if any node is unlabeled.
pub fn global_bias(zk: &DenseMatrix, protos: &PrototypeSet, labels: &[Option<usize>]) -> Result<f64> {
    if let Some(i) = labels.iter().position(Option::is_none) {
        return Err(Error::InvalidArgument(format!("global bias needs every label; node {i} has none")));
    }
    let all = vec![true; labels.len()];
    classification_loss(zk, protos, labels, &all).map(|(l, _)| l)
}

/// Warm-up aware combined loss for one epoch.
///
/// Before `cfg.warmup_epochs` only the classification term is active and the
/// confident set is not computed.
pub fn total_loss(
    zk: &DenseMatrix,
    protos: &PrototypeSet,
    labels: &[Option<usize>],
    train_mask: &[bool],
    bound: &[f64],
    cfg: &LossConfig,
    epoch: usize,
) -> Result<(LossReport, DenseMatrix)> {
    let (lc, mut grad) = classification_loss(zk, protos, labels, train_mask)?;
    let mut report = LossReport {
        classification_loss: lc,
        regularization: 0.0,
        total: lc,
        omega_size: 0,
        global_bias: if labels.iter().all(Option::is_some) {
            Some(global_bias(zk, protos, labels)?)
        } else {
            None
        },
    };
    if epoch >= cfg.warmup_epochs {
        let omega = confident_set(zk, protos, cfg.tau, train_mask);
        let (lh, mut grad_h) = homophilous_regularization(zk, bound, &omega)?;
        grad_h.scale(cfg.lambda);
        grad.add_assign(&grad_h)?;
        report.regularization = lh;
        report.omega_size = omega.len();
        report.total = lc + cfg.lambda * lh;
    }
    Ok((report, grad))
}

/// Per-node inner product between propagating every row of `Z⁰` and
/// propagating only the rows in `omega` (others zeroed).
///
/// With `omega` covering every node this is exactly `‖Zᴷ_i‖²`.
pub fn masked_view_check(z0: &DenseMatrix, p: &SparseMatrix, k: usize, omega: &[usize]) -> Result<Vec<f64>> {
    let full = p.spmm_power(z0, k)?;
    let mut masked_input = DenseMatrix::zeros(z0.rows(), z0.cols());
    for &i in omega {
        if i >= z0.rows() {
            return Err(Error::InvalidArgument(format!("omega member {i} out of range")));
        }
        masked_input.row_mut(i).copy_from_slice(z0.row(i));
    }
    let masked = p.spmm_power(&masked_input, k)?;
    Ok((0..z0.rows()).map(|i| dot(full.row(i), masked.row(i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototypes::solve_prototypes;
    use crate::tensor::{row_l2_normalize, Rng, NORM_EPS};

    fn protos() -> PrototypeSet {
        solve_prototypes(3, 4, 500, 0.1, &mut Rng::new(0)).unwrap()
    }

    fn random_z(rng: &mut Rng, n: usize, d: usize) -> DenseMatrix {
        DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap()
    }

    /// Central differences of `f` at `z`, one entry at a time.
    fn numeric_grad(z: &DenseMatrix, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
        let h = 1e-6;
        let mut out = DenseMatrix::zeros(z.rows(), z.cols());
        for idx in 0..z.data().len() {
            let mut plus = z.clone();
            plus.data_mut()[idx] += h;
            let mut minus = z.clone();
            minus.data_mut()[idx] -= h;
            out.data_mut()[idx] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out
    }

    fn assert_grad_close(analytic: &DenseMatrix, numeric: &DenseMatrix, tol: f64) {
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            let err = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            assert!(err <= tol, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn perfect_and_opposite_alignment() {
        let p = protos();
        let labels = vec![Some(0), Some(1), Some(2)];
        let mask = vec![true; 3];
        let aligned = p.matrix().clone();
        assert!(classification_loss(&aligned, &p, &labels, &mask).unwrap().0.abs() < 1e-15);
        let mut opposite = aligned.clone();
        opposite.scale(-1.0);
        assert!((classification_loss(&opposite, &p, &labels, &mask).unwrap().0 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_train_mask_is_an_error() {
        let p = protos();
        assert!(classification_loss(&p.matrix().clone(), &p, &[Some(0); 3], &[false; 3]).is_err());
    }

    #[test]
    fn classification_gradient_matches_finite_differences() {
        let mut rng = Rng::new(1);
        let p = protos();
        let z = random_z(&mut rng, 6, 4);
        let labels = vec![Some(0), Some(1), Some(2), Some(0), None, Some(1)];
        let mask = vec![true, true, false, true, false, true];
        let (_, g) = classification_loss(&z, &p, &labels, &mask).unwrap();
        let num = numeric_grad(&z, |m| classification_loss(m, &p, &labels, &mask).unwrap().0);
        assert_grad_close(&g, &num, 1e-6);
    }

    #[test]
    fn confident_set_thresholds() {
        let mut rng = Rng::new(2);
        let p = protos();
        let z = random_z(&mut rng, 30, 4);
        let exclude: Vec<bool> = (0..30).map(|i| i % 5 == 0).collect();
        // brute force
        for &tau in &[0.0, 0.3, 0.6, 0.9] {
            let got = confident_set(&z, &p, tau, &exclude);
            let expected: Vec<usize> = (0..30)
                .filter(|&i| !exclude[i])
                .filter(|&i| {
                    (0..3)
                        .map(|c| crate::tensor::cosine(z.row(i), p.row(c)).unwrap())
                        .any(|cos| cos >= tau - COS_SLACK)
                })
                .collect();
            assert_eq!(got, expected, "tau {tau}");
        }
        // τ = 1 only keeps rows parallel to a prototype
        let mut rows = vec![vec![0.3, 0.1, -0.2, 0.5]; 2];
        rows[1] = p.row(2).iter().map(|v| v * 2.0).collect();
        let z1 = DenseMatrix::from_rows(&rows).unwrap();
        assert_eq!(confident_set(&z1, &p, 1.0, &[false, false]), vec![1]);
    }

    #[test]
    fn zeta_cases() {
        let bound = vec![1.0, 2.0];
        let z = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(consistent_metric(&z, &bound).unwrap(), vec![0.0, 1.0]);
        assert!(consistent_metric(&z, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn opposite_embeddings_cancel() {
        // two nodes, one edge: P = [[.5,.5],[.5,.5]], z1 = −z0
        let p = SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let z0 = DenseMatrix::from_rows(&[vec![0.6, 0.8], vec![-0.6, -0.8]]).unwrap();
        let zk = p.spmm(&z0).unwrap();
        let zeta = consistent_metric(&zk, &[1.0, 1.0]).unwrap();
        assert_eq!(zeta, vec![0.0, 0.0]);
    }

    #[test]
    fn regularizer_values() {
        let z = DenseMatrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 1.0], vec![0.1, 0.0]]).unwrap();
        let bound = vec![5.0, 1.0, 1.0];
        assert_eq!(homophilous_regularization(&z, &bound, &[0, 1]).unwrap().0, 0.0);
        let (l, g) = homophilous_regularization(&z, &bound, &[]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let (l, _) = homophilous_regularization(&z, &bound, &[2]).unwrap();
        assert!((l - 0.9).abs() < 1e-15);
    }

    #[test]
    fn regularizer_gradient_matches_finite_differences() {
        let mut rng = Rng::new(3);
        let z = random_z(&mut rng, 6, 4);
        let bound: Vec<f64> = (0..6).map(|i| 1.0 + 0.7 * i as f64).collect();
        let omega = vec![0, 2, 3, 5];
        let (_, g) = homophilous_regularization(&z, &bound, &omega).unwrap();
        let num = numeric_grad(&z, |m| homophilous_regularization(m, &bound, &omega).unwrap().0);
        assert_grad_close(&g, &num, 1e-6);
    }

    #[test]
    fn warmup_and_lambda_zero() {
        let mut rng = Rng::new(4);
        let p = protos();
        let z = random_z(&mut rng, 10, 4);
        let labels: Vec<Option<usize>> = (0..10).map(|i| Some(i % 3)).collect();
        let mask: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let bound = vec![3.0; 10];
        let warm = LossConfig { lambda: 1.0, tau: 0.0, warmup_epochs: 10 };
        let (r, _) = total_loss(&z, &p, &labels, &mask, &bound, &warm, 0).unwrap();
        assert_eq!(r.regularization, 0.0);
        assert_eq!(r.omega_size, 0);
        assert_eq!(r.total, r.classification_loss);
        let off = LossConfig { lambda: 0.0, tau: 0.0, warmup_epochs: 0 };
        let (r, g) = total_loss(&z, &p, &labels, &mask, &bound, &off, 50).unwrap();
        assert_eq!(r.total, r.classification_loss);
        assert_eq!(g, classification_loss(&z, &p, &labels, &mask).unwrap().1);
    }

    #[test]
    fn total_is_sum_of_components() {
        let mut rng = Rng::new(5);
        let p = protos();
        let z = random_z(&mut rng, 20, 4);
        let labels: Vec<Option<usize>> = (0..20).map(|i| Some(i % 3)).collect();
        let mask: Vec<bool> = (0..20).map(|i| i < 6).collect();
        let bound: Vec<f64> = (0..20).map(|i| 2.0 + (i % 4) as f64).collect();
        let cfg = LossConfig { lambda: 1.3, tau: 0.2, warmup_epochs: 2 };
        let (r, g) = total_loss(&z, &p, &labels, &mask, &bound, &cfg, 5).unwrap();
        let (lc, gc) = classification_loss(&z, &p, &labels, &mask).unwrap();
        let omega = confident_set(&z, &p, 0.2, &mask);
        assert!(!omega.is_empty());
        let (lh, gh) = homophilous_regularization(&z, &bound, &omega).unwrap();
        assert!((r.total - (lc + 1.3 * lh)).abs() <= 1e-12);
        assert_eq!(r.omega_size, omega.len());
        for i in 0..g.data().len() {
            assert!((g.data()[i] - (gc.data()[i] + 1.3 * gh.data()[i])).abs() <= 1e-15);
        }
    }

    #[test]
    fn global_bias_cases() {
        let p = protos();
        let labels = vec![Some(0), Some(1), Some(2)];
        assert!(global_bias(p.matrix(), &p, &labels).unwrap().abs() < 1e-15);
        let mut neg = p.matrix().clone();
        neg.scale(-1.0);
        assert!((global_bias(&neg, &p, &labels).unwrap() - 2.0).abs() < 1e-15);
        assert!(global_bias(&neg, &p, &[Some(0), None, Some(2)]).is_err());
    }

    #[test]
    fn global_bias_is_full_mask_classification_loss() {
        let mut rng = Rng::new(6);
        let p = protos();
        let z = random_z(&mut rng, 15, 4);
        let labels: Vec<Option<usize>> = (0..15).map(|i| Some((i * 7) % 3)).collect();
        let full = classification_loss(&z, &p, &labels, &[true; 15]).unwrap().0;
        assert_eq!(global_bias(&z, &p, &labels).unwrap().to_bits(), full.to_bits());
    }

    #[test]
    fn masked_view_full_and_empty() {
        let mut rng = Rng::new(7);
        let raw = random_z(&mut rng, 5, 3);
        let (z0, _) = row_l2_normalize(&raw, NORM_EPS);
        let p = SparseMatrix::from_triplets(
            5,
            5,
            &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5), (2, 2, 1.0), (3, 3, 0.6), (3, 4, 0.4), (4, 3, 0.4), (4, 4, 0.6)],
        )
        .unwrap();
        let zk = p.spmm_power(&z0, 2).unwrap();
        let full = masked_view_check(&z0, &p, 2, &[0, 1, 2, 3, 4]).unwrap();
        for i in 0..5 {
            assert_eq!(full[i], dot(zk.row(i), zk.row(i)));
        }
        assert_eq!(masked_view_check(&z0, &p, 2, &[]).unwrap(), vec![0.0; 5]);
    }
}
