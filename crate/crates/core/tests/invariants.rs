mod support;

use nexfam::analysis::{compatibility_ratio, theorem1_bound};
use nexfam::family::{ExpFamilyModel, GaussianLinearModel, LogisticModel};
use nexfam::graph::{max_flow, EmpiricalGraph, Partition};
use nexfam::signal::NodeSignal;
use nexfam::solver::{dual_resolvent, primal_update_fixed_point, primal_update_gaussian, PrimalUpdate};
use nexfam::training::TrainingSet;
use proptest::prelude::*;
use rand::Rng;

use support::checks::{self, small_problem};
use support::graphs::{random_connected, random_edge_signal, random_node_signal, rng};

fn expect(check: support::Check) -> Result<(), TestCaseError> {
    check.map(|_| ()).map_err(TestCaseError::fail)
}

/// Minimum cut separating `source` from `sinks`, by enumerating every source side.
fn brute_force_min_cut(g: &EmpiricalGraph, source: usize, sinks: &[usize], caps: &[f64]) -> f64 {
    let n = g.node_count();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let inside = |v: usize| mask & (1 << v) != 0;
        if !inside(source) || sinks.iter().any(|&t| inside(t)) {
            continue;
        }
        let cut: f64 = g
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| inside(e.low) != inside(e.high))
            .map(|(k, _)| caps[k])
            .sum();
        best = best.min(cut);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_equals_mixed_norm_of_incidence(seed in any::<u64>(), n in 2usize..40, dim in 1usize..4, extra in 0.0f64..0.5) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, extra, (0.1, 5.0));
        let w = random_node_signal(&mut r, n, dim, 10.0);
        expect(checks::tv_identity(&g, &w))?;
    }

    #[test]
    fn incidence_and_transpose_are_adjoint(seed in any::<u64>(), n in 2usize..40, dim in 1usize..4, extra in 0.0f64..0.5) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, extra, (0.1, 5.0));
        let w = random_node_signal(&mut r, n, dim, 10.0);
        let u = random_edge_signal(&mut r, g.edge_count(), dim, 10.0);
        expect(checks::adjointness(&g, &w, &u))?;
    }

    #[test]
    fn sqrt_incidence_gram_is_laplacian(seed in any::<u64>(), n in 2usize..30, dim in 1usize..4) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, 0.3, (0.1, 5.0));
        let w = random_node_signal(&mut r, n, dim, 5.0);
        expect(checks::sqrt_laplacian(&g, &w))?;
    }

    #[test]
    fn dual_resolvent_lands_in_the_ball(seed in any::<u64>(), e in 1usize..60, dim in 1usize..5, lambda in 1e-6f64..1e3) {
        let mut r = rng(seed);
        let u = random_edge_signal(&mut r, e, dim, 3.0 * lambda);
        expect(checks::dual_feasibility(&u, lambda))?;
    }

    #[test]
    fn dual_resolvent_is_idempotent(seed in any::<u64>(), e in 1usize..30, dim in 1usize..4, lambda in 1e-3f64..10.0) {
        let mut r = rng(seed);
        let u = random_edge_signal(&mut r, e, dim, 5.0 * lambda);
        let once = dual_resolvent(&u, lambda);
        prop_assert_eq!(dual_resolvent(&once, lambda), once);
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences(seed in any::<u64>(), dim in 1usize..5) {
        let mut r = rng(seed);
        let n = 4;
        let x = (0..n * dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let y = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let s2 = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let model = GaussianLinearModel::new(dim, x, y, Some(s2)).unwrap();
        for i in 0..n {
            let w: Vec<f64> = (0..dim).map(|_| r.gen_range(-3.0..3.0)).collect();
            expect(checks::gradient_check(&model, i, &w))?;
        }
    }

    #[test]
    fn logistic_derivatives_match_finite_differences(seed in any::<u64>(), dim in 1usize..5) {
        let mut r = rng(seed);
        let n = 4;
        let x = (0..n * dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let y = (0..n).map(|_| if r.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let model = LogisticModel::new(dim, x, y).unwrap();
        for i in 0..n {
            let w: Vec<f64> = (0..dim).map(|_| r.gen_range(-5.0..5.0)).collect();
            expect(checks::gradient_check(&model, i, &w))?;
        }
    }

    #[test]
    fn preconditioned_step_size_below_one(seed in any::<u64>(), n in 2usize..60, extra in 0.0f64..0.6, tau in 0.05f64..0.99) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, extra, (0.01, 10.0));
        expect(checks::step_size(&g, tau))?;
    }

    #[test]
    fn pseudo_inverse_within_column_bound(seed in any::<u64>(), n in 2usize..60, extra in 0.0f64..0.5) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, extra, (1.0, 3.0));
        expect(checks::pinv_bound(&g))?;
    }

    #[test]
    fn max_flow_equals_brute_force_min_cut(seed in any::<u64>(), n in 2usize..=8, extra in 0.0f64..0.8) {
        let mut r = rng(seed);
        let g = random_connected(&mut r, n, extra, (1.0, 1.0));
        let caps: Vec<f64> = (0..g.edge_count()).map(|_| r.gen_range(0.1..4.0)).collect();
        let source = r.gen_range(0..n);
        let others: Vec<usize> = (0..n).filter(|&v| v != source).collect();
        let k = r.gen_range(1..=others.len());
        let sinks = &others[..k];
        let flow = max_flow(&g, source, sinks, &caps).unwrap();
        let cut = brute_force_min_cut(&g, source, sinks, &caps);
        prop_assert!((flow - cut).abs() <= 1e-9 * cut.max(1.0), "flow {} vs cut {}", flow, cut);
    }

    #[test]
    fn fixed_point_update_satisfies_optimality(seed in any::<u64>(), dim in 1usize..4, m in 1usize..10) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let model = LogisticModel::new(dim, x, vec![if r.gen::<bool>() { 1.0 } else { -1.0 }]).unwrap();
        let w_bar: Vec<f64> = (0..dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let tau_i = r.gen_range(0.01..0.9);
        let w = primal_update_fixed_point(&model, 0, &w_bar, tau_i, m, 1e-12).unwrap();
        // -t + ∇Φ(w) + (M/τ_i)(w - w̄) = 0 up to the requested accuracy
        let t = model.sufficient_statistic(0);
        let mut g = vec![0.0; dim];
        model.grad_log_partition(0, &w, &mut g);
        let scale = m as f64 / tau_i;
        for k in 0..dim {
            let r = -t[k] + g[k] + scale * (w[k] - w_bar[k]);
            prop_assert!(r.abs() <= 1e-9 * scale, "optimality residual {}", r);
        }
    }

    #[test]
    fn gaussian_closed_form_satisfies_optimality(seed in any::<u64>(), dim in 1usize..4, m in 1usize..10) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let model = GaussianLinearModel::new(dim, x, vec![r.gen_range(-3.0..3.0)], Some(vec![r.gen_range(0.1..2.0)])).unwrap();
        let w_bar: Vec<f64> = (0..dim).map(|_| r.gen_range(-2.0..2.0)).collect();
        let tau_i = r.gen_range(0.01..2.0);
        let w = primal_update_gaussian(&model, 0, &w_bar, tau_i, m).unwrap();
        let t = model.sufficient_statistic(0);
        let mut g = vec![0.0; dim];
        model.grad_log_partition(0, &w, &mut g);
        let scale = m as f64 / tau_i;
        for k in 0..dim {
            let r = -t[k] + g[k] + scale * (w[k] - w_bar[k]);
            prop_assert!(r.abs() <= 1e-10 * scale.max(1.0), "optimality residual {}", r);
        }
    }

    #[test]
    fn compatibility_estimate_is_nonnegative(seed in any::<u64>(), l in 3.5f64..10.0) {
        let mut r = rng(seed);
        let n = 12;
        let g = random_connected(&mut r, n, 0.4, (1.0, 2.0));
        // a spanning-tree cut may leave a cluster disconnected; use one cluster then
        let p = Partition::for_graph(&g, (0..n).map(|i| usize::from(i >= n / 2)).collect())
            .unwrap_or_else(|_| Partition::single(n));
        let training = TrainingSet::new(n, [0, n - 1]).unwrap();
        let est = compatibility_ratio(&g, &p, &training, 2, l, 50, seed).unwrap();
        prop_assert!(est.k_est >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_solutions_are_stationary(seed in any::<u64>(), n in 2usize..8, dim in 1usize..3, logistic in any::<bool>()) {
        let mut r = rng(seed);
        let p = small_problem(&mut r, n, dim, logistic);
        expect(checks::stationarity(&p))?;
    }
}

#[test]
fn step_size_condition_on_one_hundred_graphs() {
    let mut r = rng(7);
    for k in 0..100 {
        let n = 2 + k % 50;
        let g = random_connected(&mut r, n, 0.2, (0.05, 20.0));
        checks::step_size(&g, 0.9).unwrap();
    }
}

#[test]
fn pseudo_inverse_bound_up_to_two_hundred_nodes() {
    let mut r = rng(11);
    for n in [2, 3, 5, 10, 40, 100, 200] {
        let g = random_connected(&mut r, n, 4.0 / n as f64, (1.0, 3.0));
        checks::pinv_bound(&g).unwrap();
    }
}

#[test]
fn two_node_pseudo_inverse_by_hand() {
    let g = EmpiricalGraph::new(2, &[(0, 1, 1.0)]).unwrap();
    // D = [1, -1], D† = [1/2, -1/2]ᵀ, ρ = 2
    assert!((checks::pinv_max_entry(&g) - 0.5).abs() < 1e-15);
    checks::pinv_bound(&g).unwrap();
}

#[test]
fn solver_dual_never_leaves_the_ball() {
    let mut r = rng(3);
    for _ in 0..10 {
        let p = small_problem(&mut r, 6, 2, false);
        let cfg = nexfam::solver::SolverConfig::new(p.lambda, 50).with_primal_update(PrimalUpdate::FixedPoint);
        let mut s = nexfam::solver::PdSolver::new(&p.graph, p.model.as_dyn(), &p.training, cfg).unwrap();
        for _ in 0..50 {
            let rec = s.step().unwrap();
            assert!(rec.max_dual_norm <= p.lambda);
            assert!(EmpiricalGraph::max_block_norm(&s.state().dual) <= p.lambda);
        }
    }
}

#[test]
fn theorem_lambda_by_hand() {
    let report = theorem1_bound(&nexfam::analysis::Theorem1Params {
        asspt3_k: 2.0,
        asspt3_l: 7.0,
        fim_upper: 1.0,
        asspt2_l: None,
        dim: 1,
        cluster_sizes: vec![10, 10],
        training_size: 10,
        partition_gap: 1.0,
        max_weight: 1.0,
        edge_count: 20,
        eta: 1.0,
    })
    .unwrap();
    // κ = 5/4, 5κ² = 125/16
    assert_eq!(report.kappa, 1.25);
    assert!((report.lambda - 0.128).abs() < 1e-15);
}

#[test]
fn tv_of_constant_signal_is_zero() {
    let mut r = rng(5);
    let g = random_connected(&mut r, 20, 0.3, (0.5, 2.0));
    let w = NodeSignal::constant(20, &[1.5, -2.0]);
    assert_eq!(g.tv_norm(&w, None).unwrap(), 0.0);
}
