use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{connectivity_check, EmpiricalGraph, Partition};
use crate::error::{Error, Result};

/// Largest node count for which the spectral gap is computed by a dense
/// symmetric eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

const POWER_MAX_ITERATIONS: usize = 500_000;
const POWER_TOLERANCE: f64 = 1e-13;

pub(crate) fn dense_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, a) in edges {
        l[(i, i)] += a;
        l[(j, j)] += a;
        l[(i, j)] -= a;
        l[(j, i)] -= a;
    }
    l
}

/// Eigenvalues of the scalar Laplacian in ascending order.
pub fn laplacian_eigenvalues(g: &EmpiricalGraph) -> Vec<f64> {
    sorted_eigenvalues(dense_laplacian(g.node_count(), &g.edge_triples()))
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest nonzero eigenvalue of the scalar Laplacian of a connected graph.
pub fn spectral_gap(g: &EmpiricalGraph) -> Result<f64> {
    gap_of_edges(g.node_count(), &g.edge_triples())
}

pub(crate) fn gap_of_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "spectral gap undefined for a graph with {n} node(s)"
        )));
    }
    connectivity_check(n, edges)?;
    if n <= DENSE_EIGEN_LIMIT {
        Ok(sorted_eigenvalues(dense_laplacian(n, edges))[1])
    } else {
        power_gap(n, edges)
    }
}

/// Spectral gap by power iteration on `cI - L` restricted to the complement
/// of the constant vector, with `c` a Gershgorin bound on the spectrum.
/// Used automatically above [`DENSE_EIGEN_LIMIT`] nodes.
pub fn spectral_gap_iterative(g: &EmpiricalGraph) -> Result<f64> {
    g.ensure_connected()?;
    power_gap(g.node_count(), &g.edge_triples())
}

fn power_gap(n: usize, edges: &[(usize, usize, f64)]) -> Result<f64> {
    let mut degree = vec![0.0; n];
    for &(i, j, a) in edges {
        degree[i] += a;
        degree[j] += a;
    }
    let shift = 2.0 * degree.iter().copied().fold(0.0, f64::max);
    let apply = |x: &DVector<f64>, out: &mut DVector<f64>| {
        for k in 0..n {
            out[k] = (shift - degree[k]) * x[k];
        }
        for &(i, j, a) in edges {
            out[i] += a * x[j];
            out[j] += a * x[i];
        }
    };
    let deflate = |x: &mut DVector<f64>| {
        let mean = x.mean();
        x.add_scalar_mut(-mean);
    };

    // Deterministic start vector with no constant component.
    let mut x = DVector::from_fn(n, |k, _| ((k as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5);
    deflate(&mut x);
    x /= x.norm();
    let mut y = DVector::zeros(n);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        apply(&x, &mut y);
        deflate(&mut y);
        let rayleigh = x.dot(&y);
        let nrm = y.norm();
        if nrm == 0.0 {
            break;
        }
        std::mem::swap(&mut x, &mut y);
        x /= nrm;
        if (rayleigh - estimate).abs() <= POWER_TOLERANCE * rayleigh.abs() {
            estimate = rayleigh;
            break;
        }
        estimate = rayleigh;
    }
    Ok(shift - estimate)
}

/// Minimum spectral gap over the subgraphs induced by the clusters of `p`.
pub fn partition_spectral_gap(g: &EmpiricalGraph, p: &Partition) -> Result<f64> {
    if p.node_count() != g.node_count() {
        return Err(Error::DimensionMismatch {
            what: "partition length",
            expected: g.node_count(),
            got: p.node_count(),
        });
    }
    let mut gap = f64::INFINITY;
    for l in 0..p.cluster_count() {
        let (n, edges) = p.induced_subgraph(g, l);
        let rho = gap_of_edges(n, &edges).map_err(|err| match err {
            Error::Disconnected { .. } => {
                Error::Domain(format!("cluster {l} induces a disconnected subgraph"))
            }
            Error::Domain(msg) => Error::Domain(format!("cluster {l}: {msg}")),
            other => other,
        })?;
        gap = gap.min(rho);
    }
    Ok(gap)
}
