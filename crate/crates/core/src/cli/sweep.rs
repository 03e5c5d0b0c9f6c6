use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{csv_line, load_config, Run};
use crate::analysis::nmse;
use crate::datagen::{gen_two_cluster, TwoClusterSpec};
use crate::error::{Error, Result};
use crate::graph::normalized_connectivity;
use crate::solver::{PdSolver, SolverConfig};

/// Two-cluster instances at increasing numbers of boundary edges. Run `r`
/// of sweep point `p` draws its instance with seed `seed + p * repetitions + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub boundary_edges: Vec<usize>,
    pub repetitions: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub cluster_size: usize,
    pub avg_degree: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub labels_per_cluster: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let base = TwoClusterSpec::default();
        Self {
            boundary_edges: vec![1, 2, 3, 4, 6, 10, 15, 20, 30],
            repetitions: 10,
            lambda: 0.003,
            iterations: 100_000,
            cluster_size: base.cluster_size,
            avg_degree: base.avg_degree,
            a: base.a,
            b: base.b,
            labels_per_cluster: base.labels_per_cluster,
            noise: base.noise,
            seed: 0,
        }
    }
}

/// One fitted instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub boundary_edges: usize,
    pub repetition: usize,
    pub seed: u64,
    /// Mean normalized connectivity over the two clusters.
    pub connectivity: f64,
    pub nmse: f64,
}

/// Aggregate over the repetitions of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub boundary_edges: usize,
    /// Average of the per-run connectivities.
    pub rho_bar: f64,
    pub nmse_mean: f64,
    pub nmse_min: f64,
    pub nmse_max: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.boundary_edges.is_empty() || self.boundary_edges.contains(&0) {
            return Err(Error::Config("boundary_edges must list positive edge counts".into()));
        }
        if self.repetitions == 0 || self.iterations == 0 {
            return Err(Error::Config("repetitions and iterations must be positive".into()));
        }
        SolverConfig::new(self.lambda, self.iterations).validate()
    }

    fn instance_spec(&self, boundary_edges: usize, seed: u64) -> TwoClusterSpec {
        TwoClusterSpec {
            cluster_size: self.cluster_size,
            avg_degree: self.avg_degree,
            boundary_edges,
            a: self.a.clone(),
            b: self.b.clone(),
            labels_per_cluster: self.labels_per_cluster,
            noise: self.noise,
            seed,
            ..TwoClusterSpec::default()
        }
    }
}

fn fit_one(cfg: &SweepConfig, boundary_edges: usize, repetition: usize, seed: u64) -> Result<SweepRun> {
    let inst = gen_two_cluster(&cfg.instance_spec(boundary_edges, seed))?;
    let conn = normalized_connectivity(&inst.graph, &inst.partition, &inst.representatives)?;
    let mut solver = PdSolver::new(
        &inst.graph,
        &inst.model,
        &inst.training,
        SolverConfig::new(cfg.lambda, cfg.iterations),
    )?;
    // only the final iterate matters here, so the objective is never evaluated
    for _ in 0..cfg.iterations {
        solver.advance()?;
    }
    Ok(SweepRun {
        boundary_edges,
        repetition,
        seed,
        connectivity: conn.mean,
        nmse: nmse(&solver.state().weights, &inst.truth)?,
    })
}

/// Runs every repetition (in parallel) and aggregates per sweep point.
pub fn run_connectivity_sweep(cfg: &SweepConfig) -> Result<(Vec<SweepRun>, Vec<SweepPoint>)> {
    cfg.validate()?;
    let reps = cfg.repetitions;
    let jobs: Vec<(usize, usize, u64)> = cfg
        .boundary_edges
        .iter()
        .enumerate()
        .flat_map(|(p, &nb)| (0..reps).map(move |r| (nb, r, (p * reps + r) as u64)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(nb, r, index)| fit_one(cfg, nb, r, cfg.seed.wrapping_add(index)))
        .collect::<Result<Vec<_>>>()?;
    let points = runs
        .chunks(reps)
        .map(|chunk| {
            let k = chunk.len() as f64;
            SweepPoint {
                boundary_edges: chunk[0].boundary_edges,
                rho_bar: chunk.iter().map(|r| r.connectivity).sum::<f64>() / k,
                nmse_mean: chunk.iter().map(|r| r.nmse).sum::<f64>() / k,
                nmse_min: chunk.iter().map(|r| r.nmse).fold(f64::INFINITY, f64::min),
                nmse_max: chunk.iter().map(|r| r.nmse).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok((runs, points))
}

const GNUPLOT: &str = "\
set datafile separator ','
set key autotitle columnhead
set logscale y
set xlabel 'average normalized connectivity'
set ylabel 'NMSE'
plot 'sweep.csv' using 2:3 with linespoints title 'mean NMSE', \\
     'sweep_runs.csv' using 4:5 with points title 'single runs'
";

pub(super) fn cmd_sweep(run: &mut Run, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut cfg: SweepConfig = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run.set_seed(cfg.seed);
    run.set_config(&cfg)?;
    let (runs, points) = run.phase("sweep", || run_connectivity_sweep(&cfg))?;

    let mut table = String::from("boundary_edges,rho_bar,nmse_mean,nmse_min,nmse_max\n");
    for p in &points {
        csv_line(&mut table, &[&p.boundary_edges, &p.rho_bar, &p.nmse_mean, &p.nmse_min, &p.nmse_max]);
    }
    let mut detail = String::from("boundary_edges,repetition,seed,connectivity,nmse\n");
    for r in &runs {
        csv_line(&mut detail, &[&r.boundary_edges, &r.repetition, &r.seed, &r.connectivity, &r.nmse]);
    }
    run.write_commented("sweep.csv", &table)?;
    run.write_commented("sweep_runs.csv", &detail)?;
    run.write_commented("sweep.gp", GNUPLOT)
}
