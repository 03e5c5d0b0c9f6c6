use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{csv_line, load_config, Run};
use crate::analysis::nmse;
use crate::bundle::{format_weights, Bundle};
use crate::error::{Error, Result};
use crate::family::{AnyModel, ExpFamilyModel};
use crate::rnc::{rnc_solve_scalar, RncConfig};
use crate::signal::NodeSignal;
use crate::solver::{objective, solve, IterationRecord, SolverConfig};

/// Estimator selected by the `method` field of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitConfig {
    PrimalDual(SolverConfig),
    Rnc(RncConfig),
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig::PrimalDual(SolverConfig::default())
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    method: &'static str,
    iterations: usize,
    converged: Option<bool>,
    objective: Option<f64>,
    step_size_estimate: Option<f64>,
    residual: Option<f64>,
    /// Against `truth.csv` when the bundle has one.
    nmse: Option<f64>,
}

pub(crate) fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("k,objective,iterate_change,max_dual_norm\n");
    for r in history {
        csv_line(&mut out, &[&r.k, &r.objective, &r.iterate_change, &r.max_dual_norm]);
    }
    out
}

/// Observed values of a scalar-signal bundle (`d = 1`, every feature 1).
fn scalar_labels(bundle: &Bundle) -> Result<Vec<Option<f64>>> {
    let AnyModel::Gaussian(model) = &bundle.model else {
        return Err(Error::Config("rnc needs a gaussian bundle".into()));
    };
    if bundle.dim() != 1 {
        return Err(Error::Config(format!("rnc needs a scalar bundle, got d = {}", bundle.dim())));
    }
    let n = bundle.graph.node_count();
    let x = |i: usize| model.features(i).unwrap_or_default();
    if let Some(i) = (0..n).find(|&i| x(i) != [1.0]) {
        return Err(Error::Config(format!(
            "rnc needs unit features (a signal in noise); node {} has x = {:?}",
            i + 1,
            x(i)
        )));
    }
    Ok((0..n)
        .map(|i| bundle.training.contains(i).then(|| model.label(i)))
        .collect())
}

pub(super) fn cmd_fit(run: &mut Run, bundle_dir: &Path, config: Option<&Path>) -> Result<()> {
    let cfg: FitConfig = load_config(config)?;
    run.set_config(&cfg)?;
    let bundle = run.phase("load", || Bundle::read(bundle_dir))?;
    let score = |w: &NodeSignal| bundle.truth.as_ref().map(|t| nmse(w, t)).transpose();
    match &cfg {
        FitConfig::PrimalDual(solver) => {
            let model = bundle.model.as_dyn();
            let result = run.phase("solve", || solve(&bundle.graph, model, &bundle.training, solver))?;
            let final_objective = match result.history.last() {
                Some(r) => r.objective,
                None => objective(&bundle.graph, model, &bundle.training, &result.weights, solver.lambda)?,
            };
            let summary = FitSummary {
                method: "primal_dual",
                iterations: result.history.len(),
                converged: Some(result.converged),
                objective: Some(final_objective),
                step_size_estimate: Some(result.step_size_estimate),
                residual: None,
                nmse: score(&result.weights)?,
            };
            run.write_commented("weights.csv", &format_weights(&result.weights))?;
            run.write_commented("history.csv", &history_csv(&result.history))?;
            run.write_json("summary.json", &summary)?;
        }
        FitConfig::Rnc(rnc) => {
            let labels = scalar_labels(&bundle)?;
            let sol = run.phase("solve", || rnc_solve_scalar(&bundle.graph, &labels, rnc))?;
            let summary = FitSummary {
                method: "rnc",
                iterations: sol.iterations,
                converged: None,
                objective: None,
                step_size_estimate: None,
                residual: Some(sol.residual),
                nmse: score(&sol.weights)?,
            };
            run.write_commented("weights.csv", &format_weights(&sol.weights))?;
            run.write_json("summary.json", &summary)?;
        }
    }
    run.write_json("config.json", &cfg)
}
