use std::collections::BTreeSet;

use nalgebra::DMatrix;
use nexfam::graph::EmpiricalGraph;
use nexfam::signal::{EdgeSignal, NodeSignal};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus independent extra edges with probability
/// `extra`, weights uniform on `weights`.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: f64, weights: (f64, f64)) -> EmpiricalGraph {
    assert!(n >= 2);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = BTreeSet::new();
    for k in 1..n {
        let (a, b) = (order[k], order[rng.gen_range(0..k)]);
        pairs.insert((a.min(b), a.max(b)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < extra {
                pairs.insert((i, j));
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, rng.gen_range(weights.0..=weights.1)))
        .collect();
    EmpiricalGraph::new(n, &edges).expect("spanning tree keeps the graph connected")
}

pub fn random_node_signal(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> NodeSignal {
    let data = (0..n * dim).map(|_| rng.gen_range(-scale..=scale)).collect();
    NodeSignal::from_flat(dim, data).unwrap()
}

pub fn random_edge_signal(rng: &mut ChaCha8Rng, e: usize, dim: usize, scale: f64) -> EdgeSignal {
    let data = (0..e * dim).map(|_| rng.gen_range(-scale..=scale)).collect();
    EdgeSignal::from_flat(dim, data).unwrap()
}

/// Scalar incidence matrix built entry by entry from the edge list.
pub fn dense_incidence(g: &EmpiricalGraph, sqrt_weights: bool) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(g.edge_count(), g.node_count());
    for (e, edge) in g.edges().iter().enumerate() {
        let a = if sqrt_weights { edge.weight.sqrt() } else { edge.weight };
        d[(e, edge.low)] = a;
        d[(e, edge.high)] = -a;
    }
    d
}

pub fn dense_laplacian(g: &EmpiricalGraph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for edge in g.edges() {
        let (i, j, a) = (edge.low, edge.high, edge.weight);
        l[(i, i)] += a;
        l[(j, j)] += a;
        l[(i, j)] -= a;
        l[(j, i)] -= a;
    }
    l
}

/// Applies a scalar operator blockwise, i.e. `(M ⊗ I_d) x` for a flat buffer.
pub fn kron_apply(m: &DMatrix<f64>, x: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows() * dim];
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let a = m[(r, c)];
            if a != 0.0 {
                for k in 0..dim {
                    out[r * dim + k] += a * x[c * dim + k];
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
