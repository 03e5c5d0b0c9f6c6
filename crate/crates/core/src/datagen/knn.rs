use crate::error::{Error, Result};
use crate::graph::EmpiricalGraph;

/// Symmetrized `k`-nearest-neighbour graph with unit weights: `{i, j}` is an
/// edge when either endpoint selects the other. Distance ties go to the
/// smaller node index.
pub fn knn_graph(points: &[Vec<f64>], k: usize) -> Result<EmpiricalGraph> {
    let n = points.len();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k >= n {
        return Err(Error::invalid(format!("k = {k} must be smaller than the number of points {n}")));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid("all points must share one dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("coordinates must be finite"));
    }
    let mut selected = vec![false; n * n];
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        for j in (0..n).filter(|&j| j != i) {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            order.push((d2, j));
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &order[..k] {
            selected[i.min(j) * n + i.max(j)] = true;
        }
    }
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| selected[i * n + j])
        .map(|(i, j)| (i, j, 1.0))
        .collect();
    EmpiricalGraph::new(n, &edges)
}
