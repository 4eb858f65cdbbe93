mod common;

use common::*;
use normprop::graph::{propagation_upper_bound, renormalized_adjacency};
use normprop::loss::{classification_loss, global_bias, masked_view_check};
use normprop::model::{forward, Hyper};
use normprop::prototypes::solve_prototypes;
use normprop::tensor::{DenseMatrix, Rng};

fn eval_hyper(k: usize) -> Hyper {
    Hyper {
        k,
        hidden: 6,
        dim: 3,
        dropout: 0.0,
    }
}

#[test]
fn sparse_pipeline_matches_dense_oracle() {
    let mut rng = Rng::new(11);
    for case in 0..40 {
        let n = 2 + case % 49;
        let k = case % 4;
        let g = random_graph(&mut rng, n, 0.15, 4, 3);
        let hyper = eval_hyper(k);
        let params = random_params(&mut rng, 4, 6, 3);
        let p = renormalized_adjacency(&g);
        let zk = forward(&params, &g, &p, &hyper, &mut rng, false).unwrap().zk;
        let prop = dense_propagation(&g);
        let oracle = dense_pipeline(&params, g.features(), &prop, k);
        for (got, want) in zk.to_rows().iter().zip(&oracle) {
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() <= 1e-12, "n={n} k={k}: {a} vs {b}");
            }
        }
        let bound = propagation_upper_bound(&p, k).unwrap();
        for (a, b) in bound.iter().zip(dense_bound(&prop, k)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn full_mask_view_equals_squared_norms() {
    let mut rng = Rng::new(5);
    for k in 0..4 {
        let g = random_graph(&mut rng, 20, 0.2, 3, 2);
        let p = renormalized_adjacency(&g);
        let cache = forward(&random_params(&mut rng, 3, 6, 3), &g, &p, &eval_hyper(k), &mut rng, false).unwrap();
        let all: Vec<usize> = (0..20).collect();
        let report = masked_view_check(&cache.z0, &p, k, &all).unwrap();
        for (i, r) in report.iter().enumerate() {
            let z = cache.zk.row(i);
            let sq: f64 = z.iter().map(|v| v * v).sum();
            assert_eq!(*r, sq);
        }
    }
}

#[test]
fn global_bias_is_full_mask_classification_loss() {
    let mut rng = Rng::new(9);
    let protos = solve_prototypes(3, 3, 300, 0.1, &mut rng).unwrap();
    let z = DenseMatrix::from_vec(15, 3, (0..45).map(|_| rng.normal()).collect()).unwrap();
    let labels: Vec<Option<usize>> = (0..15).map(|i| Some(i % 3)).collect();
    let (full, _) = classification_loss(&z, &protos, &labels, &[true; 15]).unwrap();
    assert_eq!(global_bias(&z, &protos, &labels).unwrap(), full);
}

#[test]
fn pipeline_gradients_match_finite_differences() {
    for (seed, k) in [(1, 0), (2, 1), (3, 2), (4, 3), (5, 2)] {
        let err = pipeline_gradient_error(seed, k);
        assert!(err <= 1e-4, "seed {seed} K={k}: rel err {err:e}");
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let (lc, lh) = loss_gradient_errors(21);
    assert!(lc <= 1e-6, "classification: {lc:e}");
    assert!(lh <= 1e-6, "regularization: {lh:e}");
}
