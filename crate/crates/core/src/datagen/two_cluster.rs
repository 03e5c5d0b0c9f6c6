use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::unit_sphere;
use crate::error::{Error, Result};
use crate::family::GaussianLinearModel;
use crate::graph::{connectivity_check, EmpiricalGraph, Partition};
use crate::signal::{dot, NodeSignal};
use crate::training::TrainingSet;

/// Two random clusters joined by a few boundary edges, with a networked
/// linear regression whose true weights are `a` on the first cluster and `b`
/// on the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoClusterSpec {
    pub cluster_size: usize,
    pub avg_degree: f64,
    pub boundary_edges: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub labels_per_cluster: usize,
    pub noise: f64,
    /// Attempts per cluster at drawing a connected random graph.
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for TwoClusterSpec {
    fn default() -> Self {
        Self {
            cluster_size: 40,
            avg_degree: 10.0,
            boundary_edges: 1,
            a: vec![1.0, 1.0],
            b: vec![1.0, -1.0],
            labels_per_cluster: 3,
            noise: 0.0,
            max_retries: 1000,
            seed: 0,
        }
    }
}

impl TwoClusterSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.cluster_size;
        if n < 2 {
            return Err(Error::Config("cluster_size must be at least 2".into()));
        }
        if !(self.avg_degree > 0.0 && self.avg_degree <= (n - 1) as f64) {
            return Err(Error::Config(format!(
                "avg_degree must lie in (0, {}], got {}",
                n - 1,
                self.avg_degree
            )));
        }
        if self.boundary_edges > n * n {
            return Err(Error::Config(format!(
                "boundary_edges {} exceeds the {} possible cross-cluster pairs",
                self.boundary_edges,
                n * n
            )));
        }
        if self.a.is_empty() || self.a.len() != self.b.len() {
            return Err(Error::Config("a and b must be nonempty and of equal length".into()));
        }
        if self.labels_per_cluster == 0 || self.labels_per_cluster > n {
            return Err(Error::Config(format!(
                "labels_per_cluster must lie in 1..={n}, got {}",
                self.labels_per_cluster
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise must be nonnegative, got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TwoClusterInstance {
    pub graph: EmpiricalGraph,
    pub model: GaussianLinearModel,
    pub truth: NodeSignal,
    pub training: TrainingSet,
    pub partition: Partition,
    /// One node per cluster used as the flow source for connectivity.
    pub representatives: Vec<usize>,
}

fn random_cluster(rng: &mut ChaCha8Rng, n: usize, p: f64, offset: usize, retries: usize) -> Result<Vec<(usize, usize, f64)>> {
    for _ in 0..retries.max(1) {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j, 1.0));
                }
            }
        }
        if connectivity_check(n, &edges).is_ok() {
            return Ok(edges.into_iter().map(|(i, j, w)| (i + offset, j + offset, w)).collect());
        }
    }
    Err(Error::Domain(format!(
        "no connected cluster graph after {retries} attempts (n = {n}, p = {p:.4})"
    )))
}

pub fn gen_two_cluster(spec: &TwoClusterSpec) -> Result<TwoClusterInstance> {
    spec.validate()?;
    let n = spec.cluster_size;
    let dim = spec.a.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.avg_degree / (n - 1) as f64;

    let mut edges = random_cluster(&mut rng, n, p, 0, spec.max_retries)?;
    edges.extend(random_cluster(&mut rng, n, p, n, spec.max_retries)?);
    let mut endpoint = vec![false; 2 * n];
    for flat in index::sample(&mut rng, n * n, spec.boundary_edges).into_vec() {
        let (i, j) = (flat / n, n + flat % n);
        endpoint[i] = true;
        endpoint[j] = true;
        edges.push((i, j, 1.0));
    }
    let graph = EmpiricalGraph::new(2 * n, &edges)?;

    let truth_blocks: Vec<&[f64]> = (0..2 * n).map(|i| if i < n { &spec.a[..] } else { &spec.b[..] }).collect();
    let truth = NodeSignal::from_blocks(&truth_blocks)?;
    let mut features = Vec::with_capacity(2 * n * dim);
    let mut labels = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let x = unit_sphere(&mut rng, dim);
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(dot(&x, truth.block(i)) + spec.noise * noise);
        features.extend(x);
    }
    let model = GaussianLinearModel::new(dim, features, labels, None)?;

    let mut labelled = Vec::with_capacity(2 * spec.labels_per_cluster);
    for offset in [0, n] {
        labelled.extend(index::sample(&mut rng, n, spec.labels_per_cluster).into_iter().map(|i| i + offset));
    }
    let training = TrainingSet::new(2 * n, labelled)?;
    let partition = Partition::for_graph(&graph, (0..2 * n).map(|i| usize::from(i >= n)).collect())?;

    let mut representatives = Vec::with_capacity(2);
    for l in 0..2 {
        let cluster = partition.cluster(l);
        let rep = cluster
            .iter()
            .copied()
            .find(|&i| training.contains(i) && !endpoint[i])
            .or_else(|| cluster.iter().copied().find(|&i| !endpoint[i]))
            .ok_or_else(|| Error::Domain(format!("every node of cluster {l} touches the boundary")))?;
        representatives.push(rep);
    }

    Ok(TwoClusterInstance {
        graph,
        model,
        truth,
        training,
        partition,
        representatives,
    })
}
