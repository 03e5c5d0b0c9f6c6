use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ScalarSignalModel;
use crate::graph::{EmpiricalGraph, Partition};
use crate::signal::NodeSignal;
use crate::training::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChainTopology {
    /// Path `1 - 2 - ... - N`.
    #[default]
    Chain,
    /// Two complete graphs on the halves, joined by the edge `{N/2, N/2 + 1}`.
    TwoCluster,
}

/// Scalar signal `+1` on the first half of the nodes and `-1` on the second,
/// observed in Gaussian noise at the first three and last three nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSpec {
    pub nodes: usize,
    pub noise: f64,
    pub topology: ChainTopology,
    pub seed: u64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            nodes: 40,
            noise: 0.1,
            topology: ChainTopology::Chain,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainInstance {
    pub graph: EmpiricalGraph,
    pub model: ScalarSignalModel,
    pub truth: NodeSignal,
    pub training: TrainingSet,
    pub partition: Partition,
}

impl ChainInstance {
    /// Observed labels for the training nodes, `None` elsewhere.
    pub fn observed_labels(&self) -> Vec<Option<f64>> {
        let labels = self.model.as_gaussian().labels();
        (0..labels.len())
            .map(|i| self.training.contains(i).then_some(labels[i]))
            .collect()
    }
}

pub fn gen_chain_signal(spec: &ChainSpec) -> Result<ChainInstance> {
    let n = spec.nodes;
    if n < 8 {
        return Err(Error::Config(format!("nodes must be at least 8, got {n}")));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::Config(format!("noise must be nonnegative, got {}", spec.noise)));
    }
    let half = n / 2;
    let edges: Vec<(usize, usize, f64)> = match spec.topology {
        ChainTopology::Chain => (0..n - 1).map(|i| (i, i + 1, 1.0)).collect(),
        ChainTopology::TwoCluster => {
            let mut e = Vec::new();
            for (lo, hi) in [(0, half), (half, n)] {
                for i in lo..hi {
                    for j in i + 1..hi {
                        e.push((i, j, 1.0));
                    }
                }
            }
            e.push((half - 1, half, 1.0));
            e
        }
    };
    let graph = EmpiricalGraph::new(n, &edges)?;
    let truth_values: Vec<f64> = (0..n).map(|i| if i < half { 1.0 } else { -1.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<f64> = truth_values
        .iter()
        .map(|w| w + spec.noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    // a noiseless instance still needs a positive variance in the likelihood
    let variance = if spec.noise > 0.0 { spec.noise * spec.noise } else { 1.0 };
    let model = ScalarSignalModel::new(labels, variance)?;
    let training = TrainingSet::new(n, [0, 1, 2, n - 3, n - 2, n - 1])?;
    let partition = Partition::for_graph(&graph, (0..n).map(|i| usize::from(i >= half)).collect())?;
    Ok(ChainInstance {
        graph,
        model,
        truth: NodeSignal::from_flat(1, truth_values)?,
        training,
        partition,
    })
}
