//! Exhaustive grid minimization of the nLasso objective for two or three
//! scalar nodes. The pairwise TV terms are handled with L1 distance
//! transforms so a 6001-point grid per axis stays affordable.

use nexfam::family::{AnyModel, GaussianLinearModel, LogisticModel};
use nexfam::graph::EmpiricalGraph;
use nexfam::solver::{objective, solve, PrimalUpdate, SolverConfig};
use nexfam::training::TrainingSet;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Check;

pub const GRID_LO: f64 = -3.0;
pub const GRID_HI: f64 = 3.0;
pub const GRID_STEP: f64 = 1e-3;

/// `h[k] = min_j a[j] + slope |k - j|`, exact on the grid.
fn distance_transform(a: &[f64], slope: f64) -> Vec<f64> {
    let mut h = a.to_vec();
    for k in 1..h.len() {
        h[k] = h[k].min(h[k - 1] + slope);
    }
    for k in (0..h.len() - 1).rev() {
        h[k] = h[k].min(h[k + 1] + slope);
    }
    h
}

/// Per-node data of a scalar instance, written out independently of the
/// library's model types.
#[derive(Debug, Clone)]
pub struct ScalarNode {
    pub feature: f64,
    /// Observed label, `None` when the node is not in the training set.
    pub label: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub logistic: bool,
    pub nodes: Vec<ScalarNode>,
    pub edges: Vec<(usize, usize, f64)>,
    pub lambda: f64,
}

impl OracleInstance {
    fn labelled(&self) -> usize {
        self.nodes.iter().filter(|n| n.label.is_some()).count()
    }

    /// Loss term of one node, already divided by the training-set size.
    fn unary(&self, node: &ScalarNode, w: f64) -> f64 {
        let Some(y) = node.label else { return 0.0 };
        let s = node.feature * w;
        let loss = if self.logistic {
            // log(exp(s/2) + exp(-s/2)) - y s / 2
            s.abs() / 2.0 + (-s.abs()).exp().ln_1p() - y * s / 2.0
        } else {
            s * s / 2.0 - y * s
        };
        loss / self.labelled() as f64
    }

    pub fn grid_minimum(&self) -> f64 {
        let steps = ((GRID_HI - GRID_LO) / GRID_STEP).round() as usize;
        let axis: Vec<f64> = (0..=steps).map(|k| GRID_LO + k as f64 * GRID_STEP).collect();
        let unary: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|nd| axis.iter().map(|&w| self.unary(nd, w)).collect())
            .collect();
        let n = self.nodes.len();
        let mut cost = [[0.0; 3]; 3];
        for &(i, j, a) in &self.edges {
            cost[i][j] += self.lambda * a;
            cost[j][i] += self.lambda * a;
        }
        match n {
            2 => {
                let h = distance_transform(&unary[1], cost[0][1] * GRID_STEP);
                (0..axis.len()).map(|k| unary[0][k] + h[k]).fold(f64::INFINITY, f64::min)
            }
            3 => {
                let mut best = f64::INFINITY;
                let mut a = vec![0.0; axis.len()];
                for k1 in 0..axis.len() {
                    for (k3, slot) in a.iter_mut().enumerate() {
                        *slot = unary[2][k3] + cost[0][2] * GRID_STEP * k1.abs_diff(k3) as f64;
                    }
                    let h = distance_transform(&a, cost[1][2] * GRID_STEP);
                    for k2 in 0..axis.len() {
                        let v = unary[0][k1] + unary[1][k2] + cost[0][1] * GRID_STEP * k1.abs_diff(k2) as f64 + h[k2];
                        best = best.min(v);
                    }
                }
                best
            }
            _ => panic!("grid oracle handles two or three nodes"),
        }
    }

    fn library_problem(&self) -> (EmpiricalGraph, AnyModel, TrainingSet) {
        let n = self.nodes.len();
        let graph = EmpiricalGraph::new(n, &self.edges).unwrap();
        let features: Vec<f64> = self.nodes.iter().map(|nd| nd.feature).collect();
        let labels: Vec<f64> = self.nodes.iter().map(|nd| nd.label.unwrap_or(f64::NAN)).collect();
        let model = if self.logistic {
            AnyModel::Logistic(LogisticModel::new(1, features, labels).unwrap())
        } else {
            AnyModel::Gaussian(GaussianLinearModel::new(1, features, labels, None).unwrap())
        };
        let training = TrainingSet::new(n, (0..n).filter(|&i| self.nodes[i].label.is_some())).unwrap();
        (graph, model, training)
    }

    /// Final objective of the primal-dual solver and the largest |weight|.
    pub fn solver_objective(&self) -> Result<(f64, f64), String> {
        let (graph, model, training) = self.library_problem();
        let cfg = SolverConfig {
            tolerance: Some(1e-12),
            ..SolverConfig::new(self.lambda, 200_000).with_primal_update(PrimalUpdate::FixedPoint)
        };
        let res = solve(&graph, model.as_dyn(), &training, &cfg).map_err(|e| e.to_string())?;
        let obj = objective(&graph, model.as_dyn(), &training, &res.weights, self.lambda).map_err(|e| e.to_string())?;
        let reach = res.weights.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((obj, reach))
    }
}

/// Random instance with two or three nodes. Parameters keep the minimizer
/// well inside the grid box.
pub fn random_instance(rng: &mut ChaCha8Rng, logistic: bool) -> OracleInstance {
    let n = rng.gen_range(2..=3);
    let edges: Vec<(usize, usize, f64)> = if n == 2 {
        vec![(0, 1, rng.gen_range(0.5..=2.0))]
    } else {
        let mut e = vec![(0, 1, rng.gen_range(0.5..=2.0)), (1, 2, rng.gen_range(0.5..=2.0))];
        if rng.gen::<bool>() {
            e.push((0, 2, rng.gen_range(0.5..=2.0)));
        }
        e
    };
    let labelled = if logistic { rng.gen_range(2..=n) } else { rng.gen_range(1..=n) };
    let picked = index::sample(rng, n, labelled).into_vec();
    let mut nodes: Vec<ScalarNode> = (0..n)
        .map(|_| ScalarNode {
            feature: rng.gen_range(0.5..=1.5),
            label: None,
        })
        .collect();
    for (k, &i) in picked.iter().enumerate() {
        nodes[i].label = Some(if logistic {
            // both classes present keeps the logistic minimizer finite
            match k {
                0 => 1.0,
                1 => -1.0,
                _ => if rng.gen::<bool>() { 1.0 } else { -1.0 },
            }
        } else {
            rng.gen_range(-1.2..=1.2)
        });
    }
    let lambda = if logistic { rng.gen_range(0.1..=0.5) } else { rng.gen_range(0.05..=1.0) };
    OracleInstance {
        logistic,
        nodes,
        edges,
        lambda,
    }
}

/// Twenty instances, alternating Gaussian and logistic.
pub fn oracle_suite(rng: &mut ChaCha8Rng) -> Vec<OracleInstance> {
    (0..20).map(|k| random_instance(rng, k % 2 == 1)).collect()
}

pub fn compare(inst: &OracleInstance) -> Check {
    let (solver, reach) = inst.solver_objective()?;
    if reach > GRID_HI {
        return Err(format!("solver weight {reach} lies outside the grid box"));
    }
    let grid = inst.grid_minimum();
    let gap = (solver - grid).abs();
    if gap <= 1e-4 {
        Ok(format!("|{solver:.8} - {grid:.8}| = {gap:.1e}"))
    } else {
        Err(format!("solver objective {solver} vs grid minimum {grid} (gap {gap:.2e})"))
    }
}
