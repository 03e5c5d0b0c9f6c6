use std::collections::VecDeque;

use serde::Serialize;

use super::{EmpiricalGraph, Partition};
use crate::error::{Error, Result};

/// Residual capacities at or below this value are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-12;

struct Residual {
    head: Vec<usize>,
    cap: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn new(n: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Adds arc `u -> v` with capacity `forward` whose paired arc `v -> u`
    /// has capacity `backward`. An undirected edge uses `forward == backward`.
    fn add_pair(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        self.adj[u].push(self.head.len());
        self.head.push(v);
        self.cap.push(forward);
        self.adj[v].push(self.head.len());
        self.head.push(u);
        self.cap.push(backward);
    }

    /// Edmonds–Karp: repeatedly augment along a shortest path.
    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let n = self.adj.len();
        let mut total = 0.0;
        let mut parent_arc = vec![usize::MAX; n];
        loop {
            parent_arc.iter_mut().for_each(|p| *p = usize::MAX);
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            'bfs: while let Some(v) = queue.pop_front() {
                for &arc in &self.adj[v] {
                    let u = self.head[arc];
                    if u != s && parent_arc[u] == usize::MAX && self.cap[arc] > RESIDUAL_EPS {
                        parent_arc[u] = arc;
                        if u == t {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(u);
                    }
                }
            }
            if !reached {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while v != s {
                let arc = parent_arc[v];
                bottleneck = bottleneck.min(self.cap[arc]);
                v = self.head[arc ^ 1];
            }
            let mut v = t;
            while v != s {
                let arc = parent_arc[v];
                self.cap[arc] -= bottleneck;
                self.cap[arc ^ 1] += bottleneck;
                v = self.head[arc ^ 1];
            }
            total += bottleneck;
        }
    }
}

/// Maximum flow from `source` to a super-sink attached to every node in
/// `sinks`. Each undirected edge `e` becomes two opposite arcs of capacity
/// `capacities[e]`. An unreachable sink set gives a flow of zero.
pub fn max_flow(g: &EmpiricalGraph, source: usize, sinks: &[usize], capacities: &[f64]) -> Result<f64> {
    let n = g.node_count();
    if source >= n {
        return Err(Error::invalid(format!("source {source} out of range")));
    }
    if sinks.is_empty() {
        return Err(Error::invalid("sink set is empty"));
    }
    if let Some(&bad) = sinks.iter().find(|&&t| t >= n) {
        return Err(Error::invalid(format!("sink {bad} out of range")));
    }
    if sinks.contains(&source) {
        return Err(Error::invalid(format!("source {source} is also a sink")));
    }
    if capacities.len() != g.edge_count() {
        return Err(Error::DimensionMismatch {
            what: "capacity vector",
            expected: g.edge_count(),
            got: capacities.len(),
        });
    }
    if let Some(bad) = capacities.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::invalid(format!("capacity {bad} is not a finite nonnegative number")));
    }

    let super_sink = n;
    let mut net = Residual::new(n + 1);
    for (edge, &c) in g.edges().iter().zip(capacities) {
        if c > 0.0 {
            net.add_pair(edge.low, edge.high, c, c);
        }
    }
    let mut attached = vec![false; n];
    for &t in sinks {
        if !attached[t] {
            attached[t] = true;
            net.add_pair(t, super_sink, f64::INFINITY, 0.0);
        }
    }
    Ok(net.max_flow(source, super_sink))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ClusterConnectivity {
    /// Max-flow to the cluster's boundary endpoints divided by the boundary size.
    Finite(f64),
    /// The cluster has no boundary edges.
    NoBoundary,
}

impl ClusterConnectivity {
    /// Numeric value, `+inf` for a cluster without boundary.
    pub fn value(&self) -> f64 {
        match self {
            ClusterConnectivity::Finite(v) => *v,
            ClusterConnectivity::NoBoundary => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub clusters: Vec<ClusterConnectivity>,
    /// Boundary size `|∂|` used for normalization of each cluster.
    pub boundary_sizes: Vec<usize>,
    /// Mean over clusters; `+inf` if any cluster has no boundary.
    pub mean: f64,
}

/// Normalized flow connectivity of each cluster: the maximum flow (edge
/// capacities `A_e`, restricted to edges inside the cluster) from the
/// cluster's representative node to the cluster-side endpoints of its
/// boundary edges, divided by the number of boundary edges of the cluster.
pub fn normalized_connectivity(
    g: &EmpiricalGraph,
    p: &Partition,
    representatives: &[usize],
) -> Result<ConnectivityReport> {
    if p.node_count() != g.node_count() {
        return Err(Error::DimensionMismatch {
            what: "partition length",
            expected: g.node_count(),
            got: p.node_count(),
        });
    }
    if representatives.len() != p.cluster_count() {
        return Err(Error::DimensionMismatch {
            what: "representative count",
            expected: p.cluster_count(),
            got: representatives.len(),
        });
    }
    let boundary = p.boundary_edges(g);
    let mut clusters = Vec::with_capacity(p.cluster_count());
    let mut boundary_sizes = Vec::with_capacity(p.cluster_count());
    for (l, &rep) in representatives.iter().enumerate() {
        if rep >= g.node_count() || p.cluster_of(rep) != l {
            return Err(Error::invalid(format!(
                "representative {rep} is not a node of cluster {l}"
            )));
        }
        let mut endpoints = Vec::new();
        let mut size = 0;
        for &e in &boundary {
            let edge = g.edge(e);
            for v in [edge.low, edge.high] {
                if p.cluster_of(v) == l {
                    size += 1;
                    if !endpoints.contains(&v) {
                        endpoints.push(v);
                    }
                }
            }
        }
        boundary_sizes.push(size);
        if size == 0 {
            clusters.push(ClusterConnectivity::NoBoundary);
            continue;
        }
        if endpoints.contains(&rep) {
            return Err(Error::invalid(format!(
                "representative {rep} of cluster {l} is itself a boundary endpoint"
            )));
        }
        let capacities: Vec<f64> = g
            .edges()
            .iter()
            .map(|e| {
                if p.cluster_of(e.low) == l && p.cluster_of(e.high) == l {
                    e.weight
                } else {
                    0.0
                }
            })
            .collect();
        let flow = max_flow(g, rep, &endpoints, &capacities)?;
        clusters.push(ClusterConnectivity::Finite(flow / size as f64));
    }
    let mean = clusters.iter().map(ClusterConnectivity::value).sum::<f64>() / clusters.len() as f64;
    Ok(ConnectivityReport {
        clusters,
        boundary_sizes,
        mean,
    })
}
