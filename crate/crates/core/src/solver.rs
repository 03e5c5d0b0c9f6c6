//! Preconditioned primal-dual solver for the network Lasso
//!
//! ```text
//! minimize  Ê(w) + λ Σ_e A_e ||w[low] - w[high]||
//! ```
//!
//! Each iteration computes `w̄ = w - T Dᵀu`, replaces the labelled blocks of
//! `w̄` by (approximate) proximal steps of the local loss, and then projects
//! `u + Σ D(2w_new - w)` blockwise onto the `λ`-ball.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{neg_log_likelihood, ExpFamilyModel};
use crate::graph::EmpiricalGraph;
use crate::signal::{dot, norm, EdgeSignal, NodeSignal};
use crate::training::TrainingSet;

/// Nodes per rayon task in the primal phase.
const PRIMAL_CHUNK: usize = 256;
/// Cap on fixed-point steps for a single node update.
const MAX_FIXED_POINT_STEPS: usize = 100_000;
/// Krylov dimension cap for the step-size estimate.
const STEP_SIZE_LANCZOS_STEPS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrimalUpdate {
    /// Exact minimizer; only available for quadratic log-partitions.
    ClosedForm,
    /// Contraction iteration run to the scheduled accuracy.
    #[default]
    FixedPoint,
    /// A single Newton step from `w̄`.
    NewtonStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub tau: f64,
    pub max_iterations: usize,
    /// Stop once `||w_{k+1} - w_k|| / ||w_{k+1}||` falls below this value.
    pub tolerance: Option<f64>,
    pub primal_update: PrimalUpdate,
    /// Upper bound `ε₀` of the inexactness schedule `min(ε₀, 1/k²)`.
    pub inexactness_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tau: 0.9,
            max_iterations: 1000,
            tolerance: None,
            primal_update: PrimalUpdate::FixedPoint,
            inexactness_floor: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn new(lambda: f64, max_iterations: usize) -> Self {
        Self {
            lambda,
            max_iterations,
            ..Self::default()
        }
    }

    pub fn with_primal_update(mut self, mode: PrimalUpdate) -> Self {
        self.primal_update = mode;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if let Some(tol) = self.tolerance {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
            }
        }
        if !(self.inexactness_floor.is_finite() && self.inexactness_floor > 0.0) {
            return Err(Error::Config(format!(
                "inexactness_floor must be positive, got {}",
                self.inexactness_floor
            )));
        }
        Ok(())
    }

    /// Target accuracy `e_k` of the primal updates in iteration `k ≥ 1`.
    pub fn inexactness(&self, k: usize) -> f64 {
        let kf = k.max(1) as f64;
        self.inexactness_floor.min(1.0 / (kf * kf))
    }
}

/// Diagonal step sizes `σ_e = 1/(2 A_e)` and `τ_i = τ / d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioners {
    pub dual: Vec<f64>,
    pub primal: Vec<f64>,
}

impl Preconditioners {
    pub fn new(g: &EmpiricalGraph, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self {
            dual: g.edges().iter().map(|e| 1.0 / (2.0 * e.weight)).collect(),
            primal: g.degrees().iter().map(|d| tau / d).collect(),
        })
    }

    /// Estimate of `||Σ^{1/2} D T^{1/2}||²`: the power sequence of `BᵀB`
    /// (with `B` the scaled incidence) refined by Lanczos with full
    /// reorthogonalization. Ritz values approach the top eigenvalue from below.
    pub fn step_size_norm_sq(&self, g: &EmpiricalGraph) -> f64 {
        let n = g.node_count();
        let sqrt_t: Vec<f64> = self.primal.iter().map(|t| t.sqrt()).collect();
        let mut edge = EdgeSignal::zeros(g.edge_count(), 1);
        let mut back = NodeSignal::zeros(n, 1);
        let mut apply = |x: &[f64]| -> Vec<f64> {
            let scaled: Vec<f64> = x.iter().zip(&sqrt_t).map(|(v, s)| v * s).collect();
            let scaled = NodeSignal::from_flat(1, scaled).expect("dimension is 1");
            g.incidence_into(&scaled, &mut edge, false);
            edge.as_mut_slice().iter_mut().zip(&self.dual).for_each(|(v, s)| *v *= s);
            g.adjoint_into(&edge, &mut back, false);
            back.as_slice().iter().zip(&sqrt_t).map(|(v, s)| v * s).collect()
        };

        let start: Vec<f64> = (0..n)
            .map(|k| ((k as f64 + 1.0) * 0.754_877_666_246_692_7).fract() + 0.1)
            .collect();
        let nrm = norm(&start);
        if nrm == 0.0 {
            return 0.0;
        }
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / nrm).collect()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut estimate = 0.0;
        for j in 0..n.min(STEP_SIZE_LANCZOS_STEPS) {
            let mut v = apply(&basis[j]);
            alphas.push(dot(&basis[j], &v));
            // two passes of Gram-Schmidt keep the basis orthogonal to rounding
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
                }
            }
            let m = alphas.len();
            let tri = DMatrix::from_fn(m, m, |r, c| match r.abs_diff(c) {
                0 => alphas[r],
                1 => betas[r.min(c)],
                _ => 0.0,
            });
            let top = tri.symmetric_eigenvalues().max();
            let settled = (top - estimate).abs() <= 1e-14 * top.abs();
            estimate = top;
            let beta = norm(&v);
            if settled || beta <= 1e-12 * top.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            betas.push(beta);
            basis.push(v.iter().map(|a| a / beta).collect());
        }
        estimate
    }
}

/// Projection of each block of `u_bar` onto the Euclidean ball of radius `lambda`.
pub fn dual_resolvent(u_bar: &EdgeSignal, lambda: f64) -> EdgeSignal {
    let mut out = u_bar.clone();
    project_in_place(&mut out, lambda);
    out
}

fn project_in_place(u: &mut EdgeSignal, lambda: f64) {
    let d = u.dim();
    for block in u.as_mut_slice().chunks_mut(d) {
        project_block(block, lambda);
    }
}

/// Projects one block onto the `lambda`-ball; returns its squared norm afterwards.
fn project_block(block: &mut [f64], lambda: f64) -> f64 {
    let sq: f64 = block.iter().map(|v| v * v).sum();
    if sq <= lambda * lambda {
        return sq;
    }
    let nrm = sq.sqrt();
    if nrm > lambda {
        let s = lambda / nrm;
        block.iter_mut().for_each(|v| *v *= s);
        // rounding can leave the norm a few ulps above the radius
        while norm(block) > lambda {
            block.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
        }
    }
    block.iter().map(|v| v * v).sum()
}

fn tilde_tau(tau_i: f64, m: usize) -> Result<f64> {
    if !(tau_i.is_finite() && tau_i > 0.0) {
        return Err(Error::invalid(format!("primal step size {tau_i} must be positive")));
    }
    Ok(m as f64 / (2.0 * tau_i))
}

/// Exact primal update for a quadratic log-partition.
pub fn primal_update_gaussian(
    model: &dyn ExpFamilyModel,
    node: usize,
    w_bar: &[f64],
    tau_i: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let tt = tilde_tau(tau_i, m)?;
    model
        .exact_primal_update(node, w_bar, tt)
        .ok_or_else(|| Error::Config("model has no closed-form primal update".into()))
}

/// Fixed-point iteration `w ← w̄ + (τ_i/M)(t - ∇Φ(w))` started at `w̄`, run
/// long enough that the geometric error bound drops below `target`.
pub fn primal_update_fixed_point(
    model: &dyn ExpFamilyModel,
    node: usize,
    w_bar: &[f64],
    tau_i: f64,
    m: usize,
    target: f64,
) -> Result<Vec<f64>> {
    tilde_tau(tau_i, m)?;
    if target.is_nan() || target <= 0.0 {
        return Err(Error::invalid(format!("target accuracy {target} must be positive")));
    }
    let step = tau_i / m as f64;
    let rate = step * model.fim_norm_bound(node);
    if rate >= 1.0 {
        return Err(Error::ContractionViolated { node, rate });
    }
    let t = model.sufficient_statistic(node);
    let mut grad = vec![0.0; w_bar.len()];
    let apply = |w: &[f64], grad: &mut [f64], out: &mut [f64]| {
        model.grad_log_partition(node, w, grad);
        for k in 0..w.len() {
            out[k] = w_bar[k] + step * (t[k] - grad[k]);
        }
    };
    let mut w = w_bar.to_vec();
    let mut next = vec![0.0; w.len()];
    apply(&w, &mut grad, &mut next);
    let first_move: f64 = w.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    std::mem::swap(&mut w, &mut next);
    if first_move == 0.0 || rate == 0.0 {
        return Ok(w);
    }
    // R^r ||w¹ - w⁰|| / (1 - R) ≤ target
    let needed = (target * (1.0 - rate) / first_move).ln() / rate.ln();
    let steps = if needed.is_finite() && needed > 1.0 {
        (needed.ceil() as usize).min(MAX_FIXED_POINT_STEPS)
    } else {
        1
    };
    for _ in 1..steps {
        apply(&w, &mut grad, &mut next);
        std::mem::swap(&mut w, &mut next);
    }
    Ok(w)
}

/// One Newton step on `-wᵀt + Φ(w) + τ̃||w - w̄||²` from `w̄`.
pub fn primal_update_newton(
    model: &dyn ExpFamilyModel,
    node: usize,
    w_bar: &[f64],
    tau_i: f64,
    m: usize,
) -> Result<Vec<f64>> {
    let tt = tilde_tau(tau_i, m)?;
    let d = w_bar.len();
    let mut grad = vec![0.0; d];
    model.grad_log_partition(node, w_bar, &mut grad);
    let t = model.sufficient_statistic(node);
    let rhs = DVector::from_iterator(d, grad.iter().zip(t).map(|(g, t)| g - t));
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(w_bar.to_vec());
    }
    let mut hess = vec![0.0; d * d];
    model.hessian_log_partition(node, w_bar, &mut hess);
    let mut h = DMatrix::from_row_slice(d, d, &hess);
    for k in 0..d {
        h[(k, k)] += 2.0 * tt;
    }
    let delta = h
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular(format!("Newton system at node {node} is not positive definite")))?;
    Ok(w_bar.iter().zip(delta.iter()).map(|(w, s)| w - s).collect())
}

/// `Ê(w) + λ TV(w)`.
pub fn objective(
    g: &EmpiricalGraph,
    model: &dyn ExpFamilyModel,
    training: &TrainingSet,
    w: &NodeSignal,
    lambda: f64,
) -> Result<f64> {
    Ok(neg_log_likelihood(model, w, training)? + lambda * g.tv_norm(w, None)?)
}

/// Largest violation of `-Dᵀu ∈ ∂Ê(w)` over all nodes.
pub fn stationarity_residual(
    g: &EmpiricalGraph,
    model: &dyn ExpFamilyModel,
    training: &TrainingSet,
    w: &NodeSignal,
    u: &EdgeSignal,
) -> Result<f64> {
    let dtu = g.apply_incidence_adjoint(u)?;
    w.check_shape(g.node_count(), Some(dtu.dim()))?;
    let m = training.len() as f64;
    let mut grad = vec![0.0; w.dim()];
    let mut worst: f64 = 0.0;
    for i in 0..g.node_count() {
        let r: Vec<f64> = if training.contains(i) {
            model.grad_log_partition(i, w.block(i), &mut grad);
            let t = model.sufficient_statistic(i);
            (0..w.dim()).map(|k| (grad[k] - t[k]) / m + dtu.block(i)[k]).collect()
        } else {
            dtu.block(i).to_vec()
        };
        worst = worst.max(norm(&r));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub iterate_change: f64,
    pub max_dual_norm: f64,
}

/// Iterates of a running solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iteration: usize,
    pub weights: NodeSignal,
    pub dual: EdgeSignal,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub weights: NodeSignal,
    pub dual: EdgeSignal,
    pub history: Vec<IterationRecord>,
    /// True when the relative-change tolerance stopped the run early.
    pub converged: bool,
    pub step_size_estimate: f64,
}

/// Squared quantities gathered during one iteration.
struct StepSums {
    change_sq: f64,
    norm_sq: f64,
    max_dual_sq: f64,
}

enum NodeUpdate {
    Exact,
    FixedPoint,
    Newton,
}

pub struct PdSolver<'a> {
    graph: &'a EmpiricalGraph,
    model: &'a dyn ExpFamilyModel,
    training: &'a TrainingSet,
    config: SolverConfig,
    precond: Preconditioners,
    update: NodeUpdate,
    step_size_estimate: f64,
    state: SolverState,
    w_next: NodeSignal,
}

impl<'a> PdSolver<'a> {
    pub fn new(
        graph: &'a EmpiricalGraph,
        model: &'a dyn ExpFamilyModel,
        training: &'a TrainingSet,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = graph.node_count();
        if model.node_count() != n {
            return Err(Error::DimensionMismatch {
                what: "model node count",
                expected: n,
                got: model.node_count(),
            });
        }
        if training.node_count() != n {
            return Err(Error::DimensionMismatch {
                what: "training set universe",
                expected: n,
                got: training.node_count(),
            });
        }
        if let Some(i) = training.iter().find(|&i| !model.is_observed(i)) {
            return Err(Error::invalid(format!("training node {i} has no observed label")));
        }
        graph.ensure_connected()?;
        let update = if model.is_quadratic() {
            NodeUpdate::Exact
        } else {
            match config.primal_update {
                PrimalUpdate::ClosedForm => {
                    return Err(Error::Config(
                        "closed_form primal updates need a quadratic model; use fixed_point or newton_step".into(),
                    ))
                }
                PrimalUpdate::FixedPoint => NodeUpdate::FixedPoint,
                PrimalUpdate::NewtonStep => NodeUpdate::Newton,
            }
        };
        let precond = Preconditioners::new(graph, config.tau)?;
        if matches!(update, NodeUpdate::FixedPoint) {
            let step = 1.0 / training.len() as f64;
            for i in training.iter() {
                let rate = precond.primal[i] * step * model.fim_norm_bound(i);
                if rate >= 1.0 {
                    return Err(Error::ContractionViolated { node: i, rate });
                }
            }
        }
        let step_size_estimate = precond.step_size_norm_sq(graph);
        if step_size_estimate >= 1.0 {
            return Err(Error::StepSize {
                estimate: step_size_estimate,
            });
        }
        let d = model.dim();
        Ok(Self {
            graph,
            model,
            training,
            precond,
            update,
            step_size_estimate,
            state: SolverState {
                iteration: 0,
                weights: NodeSignal::zeros(n, d),
                dual: EdgeSignal::zeros(graph.edge_count(), d),
                lambda: config.lambda,
            },
            config,
            w_next: NodeSignal::zeros(n, d),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn preconditioners(&self) -> &Preconditioners {
        &self.precond
    }

    pub fn step_size_estimate(&self) -> f64 {
        self.step_size_estimate
    }

    /// Runs one iteration and returns its record.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let sums = self.iterate()?;
        Ok(IterationRecord {
            k: self.state.iteration,
            objective: objective(self.graph, self.model, self.training, &self.state.weights, self.config.lambda)?,
            iterate_change: sums.change_sq.sqrt() / sums.norm_sq.sqrt().max(1e-12),
            max_dual_norm: sums.max_dual_sq.sqrt(),
        })
    }

    /// Runs one iteration without evaluating the objective.
    pub fn advance(&mut self) -> Result<()> {
        self.iterate().map(|_| ())
    }

    fn iterate(&mut self) -> Result<StepSums> {
        // small block dimensions get unrolled inner loops
        match self.model.dim() {
            1 => self.iterate_with::<1>(),
            2 => self.iterate_with::<2>(),
            3 => self.iterate_with::<3>(),
            _ => self.iterate_with::<0>(),
        }
    }

    /// One iteration; `DIM` fixes the block dimension at compile time, 0 reads it at run time.
    fn iterate_with<const DIM: usize>(&mut self) -> Result<StepSums> {
        let k = self.state.iteration + 1;
        let dim = self.model.dim();
        // re-derived inside each closure so that DIM stays a compile-time constant there
        let block_dim = move || if DIM > 0 { DIM } else { dim };
        let d = block_dim();
        let g = self.graph;
        let parallel = g.node_count() >= 4 * PRIMAL_CHUNK;

        // w̄ = w - T Dᵀ u gathered per node, then the proximal step on labelled nodes
        let target = self.config.inexactness(k);
        let m = self.training.len();
        let (model, training, update, primal) = (self.model, self.training, &self.update, &self.precond.primal);
        let (weights, dual) = (&self.state.weights, &self.state.dual);
        let node_update = |i: usize, out: &mut [f64]| -> Result<()> {
            let d = block_dim();
            out.iter_mut().for_each(|v| *v = 0.0);
            for inc in g.incident(i) {
                let ue = dual.block(inc.edge);
                for c in 0..d {
                    out[c] += inc.coef * ue[c];
                }
            }
            let ti = primal[i];
            for (o, w) in out.iter_mut().zip(weights.block(i)) {
                *o = w - ti * *o;
            }
            if training.contains(i) {
                let wb = out.to_vec();
                let w = match update {
                    NodeUpdate::Exact => primal_update_gaussian(model, i, &wb, ti, m)?,
                    NodeUpdate::FixedPoint => primal_update_fixed_point(model, i, &wb, ti, m, target)?,
                    NodeUpdate::Newton => primal_update_newton(model, i, &wb, ti, m)?,
                };
                out.copy_from_slice(&w);
            }
            Ok(())
        };
        if parallel {
            self.w_next
                .as_mut_slice()
                .par_chunks_mut(PRIMAL_CHUNK * d)
                .enumerate()
                .try_for_each(|(c, chunk)| {
                    chunk
                        .chunks_mut(d)
                        .enumerate()
                        .try_for_each(|(off, out)| node_update(c * PRIMAL_CHUNK + off, out))
                })?;
        } else {
            self.w_next
                .as_mut_slice()
                .chunks_mut(d)
                .enumerate()
                .try_for_each(|(i, out)| node_update(i, out))?;
        }

        // u ← P_λ(u + Σ D(2 w_next - w)), one edge at a time
        let lambda = self.config.lambda;
        let (next, prev, sigma) = (&self.w_next, &self.state.weights, &self.precond.dual);
        let edge_update = |(e, u): (usize, &mut [f64])| -> f64 {
            let d = block_dim();
            let edge = g.edge(e);
            let (nl, nh) = (next.block(edge.low), next.block(edge.high));
            let (pl, ph) = (prev.block(edge.low), prev.block(edge.high));
            for c in 0..d {
                let diff = (2.0 * nl[c] - pl[c]) - (2.0 * nh[c] - ph[c]);
                u[c] += sigma[e] * (edge.weight * diff);
            }
            project_block(u, lambda)
        };
        // NaN must survive the reduction so that the finiteness check sees it
        let nan_max = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
        let dual_slice = self.state.dual.as_mut_slice();
        let max_dual_sq = if parallel {
            dual_slice
                .par_chunks_mut(d)
                .enumerate()
                .map(edge_update)
                .reduce(|| 0.0, nan_max)
        } else {
            dual_slice.chunks_mut(d).enumerate().map(edge_update).fold(0.0, nan_max)
        };

        let (mut change_sq, mut norm_sq) = (0.0, 0.0);
        for (a, b) in self.w_next.as_slice().iter().zip(self.state.weights.as_slice()) {
            change_sq += (a - b) * (a - b);
            norm_sq += a * a;
        }
        std::mem::swap(&mut self.state.weights, &mut self.w_next);
        self.state.iteration = k;
        if !(norm_sq.is_finite() && max_dual_sq.is_finite()) {
            return Err(Error::NonFinite { iteration: k });
        }
        Ok(StepSums {
            change_sq,
            norm_sq,
            max_dual_sq,
        })
    }

    pub fn run(mut self) -> Result<SolveResult> {
        let mut history = Vec::with_capacity(self.config.max_iterations);
        let mut converged = false;
        while self.state.iteration < self.config.max_iterations {
            let rec = self.step()?;
            history.push(rec);
            if self.config.tolerance.is_some_and(|tol| rec.iterate_change < tol) {
                converged = true;
                break;
            }
        }
        Ok(SolveResult {
            weights: self.state.weights,
            dual: self.state.dual,
            history,
            converged,
            step_size_estimate: self.step_size_estimate,
        })
    }
}

/// Runs the primal-dual solver from `w = 0`, `u = 0`.
pub fn solve(
    g: &EmpiricalGraph,
    model: &dyn ExpFamilyModel,
    training: &TrainingSet,
    config: &SolverConfig,
) -> Result<SolveResult> {
    PdSolver::new(g, model, training, config.clone())?.run()
}
