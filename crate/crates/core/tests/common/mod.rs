//! Fixtures and independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use normprop::graph::{propagation_upper_bound, renormalized_adjacency, Graph, Masks};
use normprop::loss::{classification_loss, confident_set, homophilous_regularization};
use normprop::model::{backward, forward, ForwardCache, Hyper, ModelParams};
use normprop::prototypes::{solve_prototypes, PrototypeSet};
use normprop::tensor::{DenseMatrix, Rng, SparseMatrix};

/// Erdős–Rényi graph with Gaussian features and uniformly random labels.
pub fn random_graph(rng: &mut Rng, n: usize, p_edge: f64, features: usize, classes: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.uniform() < p_edge {
                edges.push((u, v));
            }
        }
    }
    let x = DenseMatrix::from_vec(n, features, (0..n * features).map(|_| rng.normal()).collect()).unwrap();
    let labels = (0..n).map(|_| Some(rng.below(classes))).collect();
    Graph::new(n, classes, edges, x, labels, Masks::empty(n)).unwrap()
}

pub fn random_params(rng: &mut Rng, input: usize, hidden: usize, dim: usize) -> ModelParams {
    let mut m = |r: usize, c: usize| DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.normal() * 0.5).collect()).unwrap();
    let w1 = m(input, hidden);
    let b1 = m(1, hidden).into_data();
    let w2 = m(hidden, dim);
    let b2 = m(1, dim).into_data();
    ModelParams { w1, b1, w2, b2 }
}

pub type Dense = Vec<Vec<f64>>;

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` built densely from the edge list.
pub fn dense_propagation(g: &Graph) -> Dense {
    let n = g.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 1.0;
    }
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (d[i] * d[j]).sqrt();
        }
    }
    a
}

pub fn to_dense(m: &DenseMatrix) -> Dense {
    m.to_rows()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Eval-mode encoder plus `K` dense propagation steps.
pub fn dense_pipeline(params: &ModelParams, x: &DenseMatrix, prop: &Dense, k: usize) -> Dense {
    let mut h1 = mul(&to_dense(x), &to_dense(&params.w1));
    for row in &mut h1 {
        for (v, b) in row.iter_mut().zip(&params.b1) {
            *v = (*v + b).max(0.0);
        }
    }
    let mut h = mul(&h1, &to_dense(&params.w2));
    for row in &mut h {
        for (v, b) in row.iter_mut().zip(&params.b2) {
            *v += b;
        }
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    let mut z = h;
    for _ in 0..k {
        z = mul(prop, &z);
    }
    z
}

/// `P^K · 1` by repeated dense products.
pub fn dense_bound(prop: &Dense, k: usize) -> Vec<f64> {
    let mut b = vec![1.0; prop.len()];
    for _ in 0..k {
        b = prop.iter().map(|row| row.iter().zip(&b).map(|(p, v)| p * v).sum()).collect();
    }
    b
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b).max(floor)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn finite_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Six-node gradient-check fixture with `Ω` frozen at the initial point.
pub struct Fixture {
    graph: Graph,
    p: SparseMatrix,
    bound: Vec<f64>,
    protos: PrototypeSet,
    train: Vec<bool>,
    omega: Vec<usize>,
    hyper: Hyper,
}

impl Fixture {
    fn new(seed: u64, k: usize) -> (Self, ModelParams) {
        let mut rng = Rng::new(seed);
        let graph = random_graph(&mut rng, 6, 0.5, 4, 3);
        let p = renormalized_adjacency(&graph);
        let bound = propagation_upper_bound(&p, k).unwrap();
        let protos = solve_prototypes(3, 3, 300, 0.1, &mut rng).unwrap();
        let hyper = Hyper { k, hidden: 6, dim: 3, dropout: 0.0 };
        let params = random_params(&mut rng, 4, 6, 3);
        let train = vec![true, true, false, false, true, false];
        let zk = forward(&params, &graph, &p, &hyper, &mut rng, false).unwrap().zk;
        // Ω fixed at the base point; every non-train node so the term is never empty
        let mut omega = confident_set(&zk, &protos, 0.0, &train);
        if omega.is_empty() {
            omega = vec![2, 3, 5];
        }
        (
            Fixture {
                graph,
                p,
                bound,
                protos,
                train,
                omega,
                hyper,
            },
            params,
        )
    }

    fn loss(&self, params: &ModelParams, lambda: f64) -> (f64, DenseMatrix, ForwardCache) {
        let cache = forward(params, &self.graph, &self.p, &self.hyper, &mut Rng::new(0), false).unwrap();
        let (lc, mut g) = classification_loss(&cache.zk, &self.protos, self.graph.labels(), &self.train).unwrap();
        let (lh, mut gh) = homophilous_regularization(&cache.zk, &self.bound, &self.omega).unwrap();
        gh.scale(lambda);
        g.add_assign(&gh).unwrap();
        (lc + lambda * lh, g, cache)
    }
}

fn with_tensor(params: &ModelParams, t: usize, values: &[f64]) -> ModelParams {
    let mut out = params.clone();
    out.tensors_mut()[t].copy_from_slice(values);
    out
}

/// Largest per-tensor relative error between backprop and central differences
/// for `L_c + L_h` through the whole eval-mode pipeline.
pub fn pipeline_gradient_error(seed: u64, k: usize) -> f64 {
    let (fx, params) = Fixture::new(seed, k);
    let (_, grad_zk, cache) = fx.loss(&params, 1.0);
    let grads = backward(&cache, &params, &fx.p, &grad_zk, &fx.hyper).unwrap();
    (0..4)
        .map(|t| {
            let base = params.tensors()[t].to_vec();
            let fd = finite_diff(&base, 1e-5, |x| fx.loss(&with_tensor(&params, t, x), 1.0).0);
            rel_err(grads.tensors()[t], &fd, 1e-8)
        })
        .fold(0.0, f64::max)
}

/// Relative errors of the classification and regularization gradients on a random 6×4 `Zᴷ`.
pub fn loss_gradient_errors(seed: u64) -> (f64, f64) {
    let mut rng = Rng::new(seed);
    let protos = solve_prototypes(3, 4, 300, 0.1, &mut rng).unwrap();
    let z = DenseMatrix::from_vec(6, 4, (0..24).map(|_| rng.normal()).collect()).unwrap();
    let labels: Vec<Option<usize>> = (0..6).map(|i| Some(i % 3)).collect();
    let mask = [true, false, true, true, false, false];
    let bound: Vec<f64> = (0..6).map(|i| 2.0 + i as f64).collect();
    let omega = [1usize, 4, 5];
    let at = |x: &[f64]| DenseMatrix::from_vec(6, 4, x.to_vec()).unwrap();

    let (_, g) = classification_loss(&z, &protos, &labels, &mask).unwrap();
    let fd = finite_diff(z.data(), 1e-6, |x| classification_loss(&at(x), &protos, &labels, &mask).unwrap().0);
    let lc = rel_err(g.data(), &fd, 1e-8);

    let (_, g) = homophilous_regularization(&z, &bound, &omega).unwrap();
    let fd = finite_diff(z.data(), 1e-6, |x| homophilous_regularization(&at(x), &bound, &omega).unwrap().0);
    (lc, rel_err(g.data(), &fd, 1e-8))
}
