//! Laplacian-regularized least squares ("regression with network cohesion")
//! for a scalar signal:
//!
//! ```text
//! minimize  Σ_{i∈M} (y_i - w_i)² + λ wᵀLw
//! ```
//!
//! solved from its normal equations `(S + λL) w = S y` by Jacobi-preconditioned
//! conjugate gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EmpiricalGraph;
use crate::signal::{dot, NodeSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RncConfig {
    pub lambda: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Defaults to `10 N + 100` when absent.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn default_tolerance() -> f64 {
    1e-10
}

impl RncConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            tolerance: default_tolerance(),
            max_iterations: None,
        };
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!("RNC lambda must be positive, got {lambda}")));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct RncSolution {
    pub weights: NodeSignal,
    pub iterations: usize,
    /// `||S y - (S + λL) w||`.
    pub residual: f64,
}

fn apply_system(g: &EmpiricalGraph, selector: &[f64], lambda: f64, x: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        let mut acc = g.degree(i) * x[i];
        for (j, e) in g.neighbors(i) {
            acc -= g.edge(e).weight * x[j];
        }
        out[i] = selector[i] * x[i] + lambda * acc;
    }
}

/// Solves the scalar RNC problem; `labels[i]` is `None` for unlabelled nodes.
pub fn rnc_solve_scalar(g: &EmpiricalGraph, labels: &[Option<f64>], cfg: &RncConfig) -> Result<RncSolution> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "label vector",
            expected: n,
            got: labels.len(),
        });
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(Error::Config(format!("RNC lambda must be nonnegative, got {}", cfg.lambda)));
    }
    if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
        return Err(Error::Config(format!("CG tolerance must be positive, got {}", cfg.tolerance)));
    }
    if labels.iter().all(Option::is_none) {
        return Err(Error::invalid("RNC needs at least one labelled node"));
    }
    if let Some(bad) = labels.iter().flatten().find(|y| !y.is_finite()) {
        return Err(Error::invalid(format!("label {bad} is not finite")));
    }
    let lambda = cfg.lambda;
    if lambda == 0.0 {
        if labels.iter().any(Option::is_none) {
            return Err(Error::Singular(
                "RNC system is singular: lambda = 0 with unlabelled nodes".into(),
            ));
        }
        let w: Vec<f64> = labels.iter().map(|y| y.unwrap()).collect();
        return Ok(RncSolution {
            weights: NodeSignal::from_flat(1, w)?,
            iterations: 0,
            residual: 0.0,
        });
    }
    g.ensure_connected()?;

    let selector: Vec<f64> = labels.iter().map(|y| if y.is_some() { 1.0 } else { 0.0 }).collect();
    let b: Vec<f64> = labels.iter().map(|y| y.unwrap_or(0.0)).collect();
    let diag: Vec<f64> = (0..n).map(|i| selector[i] + lambda * g.degree(i)).collect();
    let b_norm = dot(&b, &b).sqrt();
    let max_iterations = cfg.max_iterations.unwrap_or(10 * n + 100);

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let threshold = cfg.tolerance * b_norm;
    while dot(&r, &r).sqrt() > threshold && iterations < max_iterations {
        apply_system(g, &selector, lambda, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }

    apply_system(g, &selector, lambda, &x, &mut ap);
    let residual = b.iter().zip(&ap).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt();
    if !residual.is_finite() || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { iteration: iterations });
    }
    Ok(RncSolution {
        weights: NodeSignal::from_flat(1, x)?,
        iterations,
        residual,
    })
}
