use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{csv_line, load_config, Run};
use crate::datagen::{gen_two_cluster, TwoClusterSpec};
use crate::error::{Error, Result};
use crate::solver::{PdSolver, SolverConfig};

/// Solver throughput on two-cluster instances of `cluster_sizes`; the
/// timings in the output table vary from run to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub cluster_sizes: Vec<usize>,
    pub avg_degree: f64,
    pub boundary_edges: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            cluster_sizes: vec![40, 400, 4000],
            avg_degree: 10.0,
            boundary_edges: 5,
            iterations: 200,
            lambda: 0.01,
            seed: 0,
        }
    }
}

pub(super) fn cmd_bench(run: &mut Run, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut cfg: BenchConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    run.set_seed(cfg.seed);
    run.set_config(&cfg)?;
    let mut table = String::from("nodes,edges,iterations,seconds,microseconds_per_iteration\n");
    for &size in &cfg.cluster_sizes {
        let spec = TwoClusterSpec {
            cluster_size: size,
            avg_degree: cfg.avg_degree.min(size.saturating_sub(1) as f64),
            boundary_edges: cfg.boundary_edges,
            seed: cfg.seed,
            ..TwoClusterSpec::default()
        };
        let inst = gen_two_cluster(&spec)?;
        let mut solver = PdSolver::new(
            &inst.graph,
            &inst.model,
            &inst.training,
            SolverConfig::new(cfg.lambda, cfg.iterations),
        )?;
        let start = Instant::now();
        run.phase(&format!("solve_{}", 2 * size), || {
            (0..cfg.iterations).try_for_each(|_| solver.step().map(|_| ()))
        })?;
        let secs = start.elapsed().as_secs_f64();
        csv_line(
            &mut table,
            &[
                &inst.graph.node_count(),
                &inst.graph.edge_count(),
                &cfg.iterations,
                &secs,
                &(1e6 * secs / cfg.iterations as f64),
            ],
        );
    }
    run.write_commented("bench.csv", &table)
}
