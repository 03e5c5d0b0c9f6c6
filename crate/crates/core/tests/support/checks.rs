use nalgebra::{DMatrix, SymmetricEigen};
use nexfam::analysis::pseudo_inverse_column_bound;
use nexfam::family::{AnyModel, ExpFamilyModel, GaussianLinearModel, LogisticModel};
use nexfam::graph::EmpiricalGraph;
use nexfam::signal::{EdgeSignal, NodeSignal};
use nexfam::solver::{dual_resolvent, solve, stationarity_residual, Preconditioners, PrimalUpdate, SolverConfig};
use nexfam::training::TrainingSet;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graphs::{dense_incidence, dense_laplacian, kron_apply, max_abs, max_abs_diff, random_connected};
use super::Check;

fn block_norm(b: &[f64]) -> f64 {
    b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||Dw||_{2,1}`, the library TV and a TV summed straight from the edge list agree.
pub fn tv_identity(g: &EmpiricalGraph, w: &NodeSignal) -> Check {
    let d = w.dim();
    let by_edges: f64 = g
        .edges()
        .iter()
        .map(|e| {
            let diff: Vec<f64> = (0..d).map(|k| w.block(e.high)[k] - w.block(e.low)[k]).collect();
            e.weight * block_norm(&diff)
        })
        .sum();
    let dw = g.apply_incidence(w).map_err(|e| e.to_string())?;
    let mixed: f64 = dw.blocks().map(block_norm).sum();
    let lib = g.tv_norm(w, None).map_err(|e| e.to_string())?;
    let scale = by_edges.max(1.0);
    let worst = (mixed - by_edges).abs().max((lib - by_edges).abs()) / scale;
    if worst <= 1e-12 {
        Ok(format!("rel err {worst:.1e}"))
    } else {
        Err(format!("TV {by_edges} vs ||Dw||_21 {mixed} vs tv_norm {lib}"))
    }
}

/// `<Dw, u> = <w, Dᵀu>`, and both operators match the dense incidence matrix.
pub fn adjointness(g: &EmpiricalGraph, w: &NodeSignal, u: &EdgeSignal) -> Check {
    let dim = w.dim();
    let dw = g.apply_incidence(w).map_err(|e| e.to_string())?;
    let dtu = g.apply_incidence_adjoint(u).map_err(|e| e.to_string())?;
    let lhs = dw.dot(u);
    let rhs = w.dot(&dtu);
    let scale = (dw.norm() * u.norm()).max(w.norm() * dtu.norm()).max(1e-300);
    let inner = (lhs - rhs).abs() / scale;
    let m = dense_incidence(g, false);
    let fwd = max_abs_diff(dw.as_slice(), &kron_apply(&m, w.as_slice(), dim));
    let back = max_abs_diff(dtu.as_slice(), &kron_apply(&m.transpose(), u.as_slice(), dim));
    let fwd_rel = fwd / max_abs(dw.as_slice()).max(1.0);
    let back_rel = back / max_abs(dtu.as_slice()).max(1.0);
    let worst = inner.max(fwd_rel).max(back_rel);
    if worst <= 1e-12 {
        Ok(format!("rel err {worst:.1e}"))
    } else {
        Err(format!("inner {inner:.2e}, forward {fwd_rel:.2e}, adjoint {back_rel:.2e}"))
    }
}

/// `D̃ᵀD̃ w = L w` for the square-root incidence, checked against a dense Laplacian.
pub fn sqrt_laplacian(g: &EmpiricalGraph, w: &NodeSignal) -> Check {
    let via_sqrt = g
        .apply_sqrt_incidence_adjoint(&g.apply_sqrt_incidence(w).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let lib = g.laplacian_apply(w).map_err(|e| e.to_string())?;
    let dense = kron_apply(&dense_laplacian(g), w.as_slice(), w.dim());
    let scale = max_abs(&dense).max(1.0);
    let worst = max_abs_diff(via_sqrt.as_slice(), &dense).max(max_abs_diff(lib.as_slice(), &dense)) / scale;
    if worst <= 1e-12 {
        Ok(format!("rel err {worst:.1e}"))
    } else {
        Err(format!("Laplacian mismatch {worst:.2e}"))
    }
}

/// Every projected block lies in the closed `lambda`-ball; blocks already
/// inside are untouched and the others keep their direction.
pub fn dual_feasibility(u: &EdgeSignal, lambda: f64) -> Check {
    let p = dual_resolvent(u, lambda);
    for (k, (before, after)) in u.blocks().zip(p.blocks()).enumerate() {
        let nrm = block_norm(after);
        if nrm > lambda {
            return Err(format!("block {k} has norm {nrm:e} > {lambda:e}"));
        }
        let orig = block_norm(before);
        if orig <= lambda {
            if before != after {
                return Err(format!("block {k} was inside the ball but changed"));
            }
        } else {
            let s = after[0] / before[0];
            let parallel = before.iter().zip(after).all(|(b, a)| (a - s * b).abs() <= 1e-12 * orig);
            if !parallel || !(s > 0.0 && s <= 1.0) || nrm < lambda * (1.0 - 1e-12) {
                return Err(format!("block {k} is not the radial projection"));
            }
        }
    }
    Ok(format!("max block norm {:.6e} <= {lambda:e}", EmpiricalGraph::max_block_norm(&p)))
}

/// Central differences of `Φ` and `∇Φ` against the analytic gradient and Hessian.
pub fn gradient_check(model: &dyn ExpFamilyModel, node: usize, w: &[f64]) -> Check {
    let d = w.len();
    let mut grad = vec![0.0; d];
    model.grad_log_partition(node, w, &mut grad);
    let mut hess = vec![0.0; d * d];
    model.hessian_log_partition(node, w, &mut hess);
    let mut fd_grad = vec![0.0; d];
    let mut fd_hess = vec![0.0; d * d];
    for k in 0..d {
        let h = 1e-5 * w[k].abs().max(1.0);
        let mut plus = w.to_vec();
        let mut minus = w.to_vec();
        plus[k] += h;
        minus[k] -= h;
        fd_grad[k] = (model.log_partition(node, &plus) - model.log_partition(node, &minus)) / (2.0 * h);
        let (mut gp, mut gm) = (vec![0.0; d], vec![0.0; d]);
        model.grad_log_partition(node, &plus, &mut gp);
        model.grad_log_partition(node, &minus, &mut gm);
        for r in 0..d {
            fd_hess[r * d + k] = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    let rel = |exact: &[f64], approx: &[f64]| {
        let diff: Vec<f64> = exact.iter().zip(approx).map(|(a, b)| a - b).collect();
        block_norm(&diff) / block_norm(exact).max(1e-2)
    };
    let g_err = rel(&grad, &fd_grad);
    let h_err = rel(&hess, &fd_hess);
    if g_err <= 1e-6 && h_err <= 1e-6 {
        Ok(format!("gradient {g_err:.1e}, Hessian {h_err:.1e}"))
    } else {
        Err(format!("node {node}: gradient rel err {g_err:.2e}, Hessian rel err {h_err:.2e}"))
    }
}

/// Exact `||Σ^{1/2} D T^{1/2}||²` from a dense eigensolve with `σ_e = 1/(2A_e)`,
/// `τ_i = τ/d_i`; it must be below one and agree with the solver's estimate.
pub fn step_size(g: &EmpiricalGraph, tau: f64) -> Check {
    let mut m = dense_incidence(g, false);
    for (e, edge) in g.edges().iter().enumerate() {
        let s = (1.0 / (2.0 * edge.weight)).sqrt();
        m.row_mut(e).iter_mut().for_each(|v| *v *= s);
    }
    let mut degree = vec![0.0; g.node_count()];
    for edge in g.edges() {
        degree[edge.low] += edge.weight;
        degree[edge.high] += edge.weight;
    }
    for (i, di) in degree.iter().enumerate() {
        let t = (tau / di).sqrt();
        m.column_mut(i).iter_mut().for_each(|v| *v *= t);
    }
    // top eigenvalue of MᵀM; the symmetric solver is the robust choice here
    let exact = SymmetricEigen::new(m.transpose() * &m).eigenvalues.max();
    let estimate = Preconditioners::new(g, tau).map_err(|e| e.to_string())?.step_size_norm_sq(g);
    if exact.is_nan() || exact >= 1.0 {
        return Err(format!("||Σ^1/2 D T^1/2||² = {exact} is not below 1"));
    }
    // Ritz values never overshoot; the certificate allows a 1e-3 margin
    if estimate > exact * (1.0 + 1e-9) || estimate < exact * (1.0 - 1e-3) {
        return Err(format!("Krylov estimate {estimate} vs exact {exact}"));
    }
    if estimate.is_nan() || estimate + 1e-3 >= 1.0 {
        return Err(format!("estimate {estimate} leaves no 1e-3 margin below 1"));
    }
    Ok(format!("{exact:.6}"))
}

/// Largest entry of `D†`, using `(DᵀD)† = (DᵀD + 11ᵀ/n)⁻¹ - 11ᵀ/n` for a
/// connected graph and an LU solve instead of any spectral routine.
pub fn pinv_max_entry(g: &EmpiricalGraph) -> f64 {
    let d = dense_incidence(g, false);
    let n = g.node_count();
    let ones = DMatrix::from_element(n, n, 1.0 / n as f64);
    let shifted = d.transpose() * &d + &ones;
    let inv = shifted.lu().try_inverse().expect("shifted Gram matrix is invertible") - ones;
    max_abs((inv * d.transpose()).as_slice())
}

/// Column-block bound on `D†` against the exact pseudo-inverse.
pub fn pinv_bound(g: &EmpiricalGraph) -> Check {
    let exact = pinv_max_entry(g);
    let eig = SymmetricEigen::new(dense_laplacian(g));
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let max_a = g.edges().iter().map(|e| e.weight).fold(0.0, f64::max);
    let bound = (2.0 * max_a).sqrt() / ev[1];
    let lib = pseudo_inverse_column_bound(g, 1).map_err(|e| e.to_string())?;
    let lib_exact = lib.exact.ok_or("library skipped the exact pseudo-inverse")?;
    if (lib.bound - bound).abs() > 1e-9 * bound || (lib_exact - exact).abs() > 1e-8 * exact.max(1e-3) {
        return Err(format!(
            "library bound/exact {}/{lib_exact} vs oracle {bound}/{exact}",
            lib.bound
        ));
    }
    if exact <= bound {
        Ok(format!("{exact:.4} <= {bound:.4}"))
    } else {
        Err(format!("exact {exact} exceeds bound {bound}"))
    }
}

/// A small random learning problem.
pub struct SmallProblem {
    pub graph: EmpiricalGraph,
    pub model: AnyModel,
    pub training: TrainingSet,
    pub lambda: f64,
}

/// Gaussian (unit variance) or logistic problem on a connected random graph
/// with weights in `[1, 2]`. Gaussian features lie in `[-1, 1]^dim`. Logistic
/// features are positive multiples of one unit direction and both labels
/// occur, so the data cannot be separated and a minimizer exists.
pub fn small_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize, logistic: bool) -> SmallProblem {
    let graph = random_connected(rng, n, 0.4, (1.0, 2.0));
    let labelled = if logistic { rng.gen_range(2..=n) } else { rng.gen_range(1..=n) };
    let nodes = index::sample(rng, n, labelled).into_vec();
    let model = if logistic {
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let len = block_norm(&dir).max(1e-3);
        dir.iter_mut().for_each(|v| *v /= len);
        let mut features = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let c = rng.gen_range(0.5..=1.0);
            features.extend(dir.iter().map(|v| c * v));
        }
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        labels[nodes[0]] = 1.0;
        labels[nodes[1]] = -1.0;
        AnyModel::Logistic(LogisticModel::new(dim, features, labels).unwrap())
    } else {
        let features = (0..n * dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let labels = (0..n).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        AnyModel::Gaussian(GaussianLinearModel::new(dim, features, labels, None).unwrap())
    };
    SmallProblem {
        training: TrainingSet::new(n, nodes).unwrap(),
        lambda: rng.gen_range(0.05..=1.0),
        graph,
        model,
    }
}

/// Runs the solver to convergence and checks `-Dᵀu ∈ ∂Ê(w)` plus exact dual feasibility.
pub fn stationarity(p: &SmallProblem) -> Check {
    let cfg = SolverConfig {
        tolerance: Some(1e-13),
        ..SolverConfig::new(p.lambda, 200_000).with_primal_update(PrimalUpdate::FixedPoint)
    };
    let model = p.model.as_dyn();
    let res = solve(&p.graph, model, &p.training, &cfg).map_err(|e| e.to_string())?;
    let worst_dual = EmpiricalGraph::max_block_norm(&res.dual);
    if worst_dual > p.lambda {
        return Err(format!("dual block norm {worst_dual:e} exceeds lambda {:e}", p.lambda));
    }
    let r = stationarity_residual(&p.graph, model, &p.training, &res.weights, &res.dual).map_err(|e| e.to_string())?;
    if r <= 1e-4 {
        Ok(format!("residual {r:.1e} after {} iterations", res.history.len()))
    } else {
        Err(format!("residual {r:.2e} after {} iterations", res.history.len()))
    }
}
