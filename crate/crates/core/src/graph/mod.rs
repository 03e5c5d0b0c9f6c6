//! The empirical graph and the linear operators defined on it.
//!
//! Edges are undirected, stored with the canonical orientation `low < high`.
//! The block-incidence operator `D` maps a node signal to the edge signal
//! whose `e`-th block is `A_e (w[low] - w[high])`, so that the total
//! variation of `w` is the sum of the block norms of `Dw`.

mod flow;
pub mod io;
mod spectral;

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::{EdgeSignal, NodeSignal};

pub use flow::{max_flow, normalized_connectivity, ClusterConnectivity, ConnectivityReport};
pub use spectral::{
    laplacian_eigenvalues, partition_spectral_gap, spectral_gap, spectral_gap_iterative,
    DENSE_EIGEN_LIMIT,
};

/// Work size (blocks times dimension) above which operator loops run on the rayon pool.
const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub low: usize,
    pub high: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Incidence {
    pub(crate) neighbor: usize,
    pub(crate) edge: usize,
    /// +1 when the node is the low endpoint of the edge, -1 otherwise.
    pub(crate) sign: f64,
    /// `sign * A_e`, the entry of `Dᵀ` at this position.
    pub(crate) coef: f64,
}

/// Undirected weighted graph with positive weights, no self-loops, no
/// duplicate edges and no isolated nodes. Immutable after construction.
#[derive(Debug, Clone)]
pub struct EmpiricalGraph {
    node_count: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
    offsets: Vec<usize>,
    incidences: Vec<Incidence>,
}

impl EmpiricalGraph {
    /// Builds a graph on nodes `0..node_count` from `(i, j, weight)` triples.
    /// Edge ids follow the input order; endpoints are reordered so `low < high`.
    pub fn new(node_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut canonical = Vec::with_capacity(edges.len());
        for (e, &(i, j, w)) in edges.iter().enumerate() {
            if i >= node_count || j >= node_count {
                return Err(Error::invalid(format!(
                    "edge {e} = ({i}, {j}) references a node outside 0..{node_count}"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("edge {e} is a self-loop at node {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "edge {e} = ({i}, {j}) has non-positive or non-finite weight {w}"
                )));
            }
            let (low, high) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((low, high)) {
                return Err(Error::invalid(format!("duplicate edge ({low}, {high})")));
            }
            canonical.push(Edge { low, high, weight: w });
        }

        let mut degrees = vec![0.0; node_count];
        let mut counts = vec![0usize; node_count];
        for edge in &canonical {
            degrees[edge.low] += edge.weight;
            degrees[edge.high] += edge.weight;
            counts[edge.low] += 1;
            counts[edge.high] += 1;
        }
        if let Some(isolated) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("node {isolated} is isolated")));
        }

        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let mut incidences = vec![
            Incidence {
                neighbor: 0,
                edge: 0,
                sign: 0.0,
                coef: 0.0,
            };
            offsets[node_count]
        ];
        for (e, edge) in canonical.iter().enumerate() {
            incidences[cursor[edge.low]] = Incidence {
                neighbor: edge.high,
                edge: e,
                sign: 1.0,
                coef: edge.weight,
            };
            cursor[edge.low] += 1;
            incidences[cursor[edge.high]] = Incidence {
                neighbor: edge.low,
                edge: e,
                sign: -1.0,
                coef: -edge.weight,
            };
            cursor[edge.high] += 1;
        }

        Ok(Self {
            node_count,
            edges: canonical,
            degrees,
            offsets,
            incidences,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Weighted degree `d_i = sum_j A_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `(neighbor, edge id)` pairs incident to node `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.incidences[self.offsets[i]..self.offsets[i + 1]]
            .iter()
            .map(|inc| (inc.neighbor, inc.edge))
    }

    pub(crate) fn incident(&self, i: usize) -> &[Incidence] {
        &self.incidences[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn edge_triples(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.low, e.high, e.weight)).collect()
    }

    /// Connected-component label for every node, labels in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    pub fn ensure_connected(&self) -> Result<()> {
        connectivity_check(self.node_count, &self.edge_triples())
    }

    /// Dual operator `D`: block `e` of the result is `A_e (w[low] - w[high])`.
    pub fn apply_incidence(&self, w: &NodeSignal) -> Result<EdgeSignal> {
        w.check_shape(self.node_count, None)?;
        let mut out = EdgeSignal::zeros(self.edge_count(), w.dim());
        self.incidence_into(w, &mut out, false);
        Ok(out)
    }

    /// `Dᵀ u`, accumulated per node so that the reduction is race-free.
    pub fn apply_incidence_adjoint(&self, u: &EdgeSignal) -> Result<NodeSignal> {
        u.check_shape(self.edge_count(), None)?;
        let mut out = NodeSignal::zeros(self.node_count, u.dim());
        self.adjoint_into(u, &mut out, false);
        Ok(out)
    }

    /// Incidence operator with `sqrt(A_e)` in place of `A_e`; its Gram
    /// operator `D̃ᵀD̃` is the graph Laplacian.
    pub fn apply_sqrt_incidence(&self, w: &NodeSignal) -> Result<EdgeSignal> {
        w.check_shape(self.node_count, None)?;
        let mut out = EdgeSignal::zeros(self.edge_count(), w.dim());
        self.incidence_into(w, &mut out, true);
        Ok(out)
    }

    pub fn apply_sqrt_incidence_adjoint(&self, u: &EdgeSignal) -> Result<NodeSignal> {
        u.check_shape(self.edge_count(), None)?;
        let mut out = NodeSignal::zeros(self.node_count, u.dim());
        self.adjoint_into(u, &mut out, true);
        Ok(out)
    }

    pub(crate) fn incidence_into(&self, w: &NodeSignal, out: &mut EdgeSignal, sqrt_weights: bool) {
        let d = w.dim();
        let src = w.as_slice();
        let edges = &self.edges;
        let kernel = |(e, block): (usize, &mut [f64])| {
            let edge = &edges[e];
            let a = if sqrt_weights { edge.weight.sqrt() } else { edge.weight };
            let lo = &src[edge.low * d..(edge.low + 1) * d];
            let hi = &src[edge.high * d..(edge.high + 1) * d];
            for k in 0..d {
                block[k] = a * (lo[k] - hi[k]);
            }
        };
        if edges.len() * d >= PARALLEL_THRESHOLD {
            out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(kernel);
        } else {
            out.as_mut_slice().chunks_mut(d).enumerate().for_each(kernel);
        }
    }

    pub(crate) fn adjoint_into(&self, u: &EdgeSignal, out: &mut NodeSignal, sqrt_weights: bool) {
        let d = u.dim();
        let src = u.as_slice();
        let kernel = |(i, block): (usize, &mut [f64])| {
            block.iter_mut().for_each(|v| *v = 0.0);
            for inc in self.incident(i) {
                let a = if sqrt_weights {
                    inc.sign * self.edges[inc.edge].weight.sqrt()
                } else {
                    inc.coef
                };
                let ue = &src[inc.edge * d..(inc.edge + 1) * d];
                for k in 0..d {
                    block[k] += a * ue[k];
                }
            }
        };
        if self.incidences.len() * d >= PARALLEL_THRESHOLD {
            out.as_mut_slice().par_chunks_mut(d).enumerate().for_each(kernel);
        } else {
            out.as_mut_slice().chunks_mut(d).enumerate().for_each(kernel);
        }
    }

    /// Total variation `sum_e A_e ||w[high] - w[low]||` over `edge_subset`
    /// (all edges when `None`).
    pub fn tv_norm(&self, w: &NodeSignal, edge_subset: Option<&[usize]>) -> Result<f64> {
        w.check_shape(self.node_count, None)?;
        let term = |e: usize| {
            let edge = &self.edges[e];
            let diff: f64 = w
                .block(edge.low)
                .iter()
                .zip(w.block(edge.high))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            edge.weight * diff.sqrt()
        };
        match edge_subset {
            None => Ok((0..self.edge_count()).map(term).sum()),
            Some(subset) => {
                if let Some(&bad) = subset.iter().find(|&&e| e >= self.edge_count()) {
                    return Err(Error::invalid(format!(
                        "unknown edge id {bad} (graph has {} edges)",
                        self.edge_count()
                    )));
                }
                Ok(subset.iter().map(|&e| term(e)).sum())
            }
        }
    }

    /// `(Λ ⊗ I - A ⊗ I) w`, computed matrix-free.
    pub fn laplacian_apply(&self, w: &NodeSignal) -> Result<NodeSignal> {
        w.check_shape(self.node_count, None)?;
        let d = w.dim();
        let mut out = NodeSignal::zeros(self.node_count, d);
        for i in 0..self.node_count {
            let wi = w.block(i).to_vec();
            let block = out.block_mut(i);
            for inc in &self.incidences[self.offsets[i]..self.offsets[i + 1]] {
                let a = self.edges[inc.edge].weight;
                let wj = w.block(inc.neighbor);
                for k in 0..d {
                    block[k] += a * (wi[k] - wj[k]);
                }
            }
        }
        Ok(out)
    }

    /// Largest block norm of an edge signal.
    pub fn max_block_norm(u: &EdgeSignal) -> f64 {
        // sqrt is monotone, so one root of the largest square suffices
        u.blocks()
            .map(|b| b.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }
}

/// Connectivity of an arbitrary edge list on `n` nodes; used for induced subgraphs.
pub(crate) fn connectivity_check(n: usize, edges: &[(usize, usize, f64)]) -> Result<()> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j, _) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut label = vec![usize::MAX; n];
    let mut components = 0;
    let mut first_unreachable = None;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        if components == 1 && first_unreachable.is_none() {
            first_unreachable = Some(start);
        }
        label[start] = components;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if label[u] == usize::MAX {
                    label[u] = components;
                    stack.push(u);
                }
            }
        }
        components += 1;
    }
    match first_unreachable {
        None => Ok(()),
        Some(node) => Err(Error::Disconnected {
            root: 0,
            unreachable: node,
            components,
        }),
    }
}

/// Disjoint, covering assignment of nodes to clusters `0..cluster_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that cluster ids are `0..k` with every cluster nonempty.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::invalid("partition must cover at least one node"));
        }
        let k = assignment.iter().max().unwrap() + 1;
        let mut clusters = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            clusters[c].push(i);
        }
        if let Some(empty) = clusters.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("cluster {empty} is empty")));
        }
        Ok(Self { assignment, clusters })
    }

    /// The trivial partition with a single cluster.
    pub fn single(node_count: usize) -> Self {
        Self::new(vec![0; node_count]).expect("nonempty")
    }

    /// Builds a partition and checks it against `g`: one entry per node and
    /// every cluster inducing a connected subgraph.
    pub fn for_graph(g: &EmpiricalGraph, assignment: Vec<usize>) -> Result<Self> {
        let p = Self::new(assignment)?;
        p.validate(g)?;
        Ok(p)
    }

    pub fn validate(&self, g: &EmpiricalGraph) -> Result<()> {
        if self.assignment.len() != g.node_count() {
            return Err(Error::DimensionMismatch {
                what: "partition length",
                expected: g.node_count(),
                got: self.assignment.len(),
            });
        }
        for (l, members) in self.clusters.iter().enumerate() {
            let (n, edges) = self.induced_subgraph(g, l);
            connectivity_check(n, &edges).map_err(|err| match err {
                Error::Disconnected { unreachable, .. } => Error::Domain(format!(
                    "cluster {l} induces a disconnected subgraph (node {} unreachable from node {})",
                    members[unreachable], members[0]
                )),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster(&self, l: usize) -> &[usize] {
        &self.clusters[l]
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Edge ids whose endpoints lie in different clusters.
    pub fn boundary_edges(&self, g: &EmpiricalGraph) -> Vec<usize> {
        g.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| self.assignment[e.low] != self.assignment[e.high])
            .map(|(k, _)| k)
            .collect()
    }

    /// Edge ids with both endpoints in the same cluster.
    pub fn interior_edges(&self, g: &EmpiricalGraph) -> Vec<usize> {
        g.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| self.assignment[e.low] == self.assignment[e.high])
            .map(|(k, _)| k)
            .collect()
    }

    /// Subgraph induced by cluster `l`, relabelled to local indices in the
    /// order of [`Partition::cluster`].
    pub fn induced_subgraph(&self, g: &EmpiricalGraph, l: usize) -> (usize, Vec<(usize, usize, f64)>) {
        let members = &self.clusters[l];
        let mut local = vec![usize::MAX; g.node_count()];
        for (k, &i) in members.iter().enumerate() {
            local[i] = k;
        }
        let edges = g
            .edges()
            .iter()
            .filter(|e| self.assignment[e.low] == l && self.assignment[e.high] == l)
            .map(|e| (local[e.low], local[e.high], e.weight))
            .collect();
        (members.len(), edges)
    }
}
