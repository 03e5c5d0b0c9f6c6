//! Per-node exponential-family likelihoods.
//!
//! Node `i` observes attributes whose density is
//! `b(z) exp(wᵀ t(z) - Φ_i(w))`. The solver only ever sees the precomputed
//! sufficient statistic `t_i`, the log-partition `Φ_i` and its derivatives.

use crate::error::{Error, Result};
use crate::signal::{dot, NodeSignal};
use crate::training::TrainingSet;

pub trait ExpFamilyModel: Send + Sync {
    fn node_count(&self) -> usize;

    fn dim(&self) -> usize;

    /// Sufficient statistic `t_i`; non-finite entries mark an unobserved node.
    fn sufficient_statistic(&self, node: usize) -> &[f64];

    fn log_partition(&self, node: usize, w: &[f64]) -> f64;

    fn grad_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]);

    /// Hessian `∇²Φ_i(w)` (the Fisher information), row-major `d x d`.
    fn hessian_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]);

    /// Upper bound on `||∇²Φ_i(w)||` over all `w`.
    fn fim_norm_bound(&self, node: usize) -> f64;

    /// Lower bound on the smallest eigenvalue of `∇²Φ_i(w)` over all `w`.
    fn fim_lower_bound(&self, _node: usize) -> f64 {
        0.0
    }

    /// True when `Φ_i` is quadratic, so [`ExpFamilyModel::exact_primal_update`] is available.
    fn is_quadratic(&self) -> bool {
        false
    }

    /// Exact minimizer of `-wᵀt + Φ(w) + τ̃||w - w̄||²` when available in closed form.
    fn exact_primal_update(&self, _node: usize, _w_bar: &[f64], _tilde_tau: f64) -> Option<Vec<f64>> {
        None
    }

    /// Feature vector used for predictions `wᵀx`, if the model has one.
    fn features(&self, _node: usize) -> Option<&[f64]> {
        None
    }

    fn is_observed(&self, node: usize) -> bool {
        self.sufficient_statistic(node).iter().all(|v| v.is_finite())
    }
}

/// `∇Φ_i(w)` as an owned vector.
pub fn grad_log_partition(model: &dyn ExpFamilyModel, node: usize, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; model.dim()];
    model.grad_log_partition(node, w, &mut out);
    out
}

/// Average negative log-likelihood over the training set (up to the base-measure term):
/// `(1/M) Σ_{i∈M} [-t_iᵀ w_i + Φ_i(w_i)]`.
pub fn neg_log_likelihood(model: &dyn ExpFamilyModel, w: &NodeSignal, training: &TrainingSet) -> Result<f64> {
    w.check_shape(model.node_count(), Some(model.dim()))?;
    if training.node_count() != model.node_count() {
        return Err(Error::DimensionMismatch {
            what: "training set universe",
            expected: model.node_count(),
            got: training.node_count(),
        });
    }
    let mut total = 0.0;
    for i in training.iter() {
        let wi = w.block(i);
        total += -dot(model.sufficient_statistic(i), wi) + model.log_partition(i, wi);
    }
    Ok(total / training.len() as f64)
}

fn check_features(dim: usize, features: &[f64], labels: &[f64]) -> Result<usize> {
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    if features.len() != dim * labels.len() {
        return Err(Error::DimensionMismatch {
            what: "feature buffer",
            expected: dim * labels.len(),
            got: features.len(),
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("features must be finite"));
    }
    Ok(labels.len())
}

/// Linear regression with Gaussian noise: `y_i = x_iᵀ w_i + ε_i`, `ε_i ~ N(0, σ_i²)`.
/// `t_i = (y_i/σ_i²) x_i` and `Φ_i(w) = (wᵀx_i)² / (2σ_i²)`.
#[derive(Debug, Clone)]
pub struct GaussianLinearModel {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    variances: Vec<f64>,
    stats: Vec<f64>,
}

impl GaussianLinearModel {
    /// `features` is row-major `N x d`; `labels[i]` may be NaN for an
    /// unobserved node; `variances` defaults to 1 everywhere.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>, variances: Option<Vec<f64>>) -> Result<Self> {
        let n = check_features(dim, &features, &labels)?;
        let variances = variances.unwrap_or_else(|| vec![1.0; n]);
        if variances.len() != n {
            return Err(Error::DimensionMismatch {
                what: "variance vector",
                expected: n,
                got: variances.len(),
            });
        }
        if let Some(bad) = variances.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("noise variance {bad} must be positive")));
        }
        let mut stats = Vec::with_capacity(n * dim);
        for i in 0..n {
            let scale = labels[i] / variances[i];
            stats.extend(features[i * dim..(i + 1) * dim].iter().map(|x| scale * x));
        }
        Ok(Self {
            dim,
            features,
            labels,
            variances,
            stats,
        })
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.variances[i]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

impl ExpFamilyModel for GaussianLinearModel {
    fn node_count(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sufficient_statistic(&self, node: usize) -> &[f64] {
        &self.stats[node * self.dim..(node + 1) * self.dim]
    }

    fn log_partition(&self, node: usize, w: &[f64]) -> f64 {
        let s = dot(w, self.x(node));
        s * s / (2.0 * self.variances[node])
    }

    fn grad_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]) {
        let x = self.x(node);
        let scale = dot(w, x) / self.variances[node];
        out.iter_mut().zip(x).for_each(|(o, xi)| *o = scale * xi);
    }

    fn hessian_log_partition(&self, node: usize, _w: &[f64], out: &mut [f64]) {
        let x = self.x(node);
        let s2 = self.variances[node];
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[r * self.dim + c] = x[r] * x[c] / s2;
            }
        }
    }

    fn fim_norm_bound(&self, node: usize) -> f64 {
        dot(self.x(node), self.x(node)) / self.variances[node]
    }

    fn fim_lower_bound(&self, node: usize) -> f64 {
        // rank one: only positive definite in one dimension
        if self.dim == 1 {
            self.fim_norm_bound(node)
        } else {
            0.0
        }
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    fn exact_primal_update(&self, node: usize, w_bar: &[f64], tilde_tau: f64) -> Option<Vec<f64>> {
        // (aaᵀ + cI) w = t + c w̄ with a = x/σ, c = 2τ̃, via Sherman–Morrison.
        let c = 2.0 * tilde_tau;
        let sigma = self.variances[node].sqrt();
        let a: Vec<f64> = self.x(node).iter().map(|x| x / sigma).collect();
        let t = self.sufficient_statistic(node);
        let b: Vec<f64> = t.iter().zip(w_bar).map(|(t, wb)| t + c * wb).collect();
        let coef = dot(&a, &b) / (c + dot(&a, &a));
        // w = (b - coef a)/c, written as a correction of w̄
        Some(
            w_bar
                .iter()
                .zip(t.iter().zip(&a))
                .map(|(wb, (tk, ak))| wb + (tk - coef * ak) / c)
                .collect(),
        )
    }

    fn features(&self, node: usize) -> Option<&[f64]> {
        Some(self.x(node))
    }
}

/// Logistic regression with labels in `{-1, +1}`:
/// `t_i = x_i y_i / 2`, `Φ_i(w) = log(exp(wᵀx/2) + exp(-wᵀx/2))`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    stats: Vec<f64>,
}

impl LogisticModel {
    /// Labels must be `±1` or NaN (unobserved).
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let n = check_features(dim, &features, &labels)?;
        if let Some(bad) = labels.iter().find(|y| !y.is_nan() && **y != 1.0 && **y != -1.0) {
            return Err(Error::invalid(format!("logistic label {bad} is not ±1")));
        }
        let mut stats = Vec::with_capacity(n * dim);
        for i in 0..n {
            stats.extend(features[i * dim..(i + 1) * dim].iter().map(|x| x * labels[i] / 2.0));
        }
        Ok(Self {
            dim,
            features,
            labels,
            stats,
        })
    }

    /// Accepts labels in `{0, 1}` (or `±1`) and maps `0 -> -1`.
    pub fn from_binary_labels(dim: usize, features: Vec<f64>, labels: &[f64]) -> Result<Self> {
        let mapped = labels
            .iter()
            .map(|&y| if y == 0.0 { -1.0 } else { y })
            .collect();
        Self::new(dim, features, mapped)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

impl ExpFamilyModel for LogisticModel {
    fn node_count(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sufficient_statistic(&self, node: usize) -> &[f64] {
        &self.stats[node * self.dim..(node + 1) * self.dim]
    }

    fn log_partition(&self, node: usize, w: &[f64]) -> f64 {
        let s = dot(w, self.x(node)).abs();
        s / 2.0 + (-s).exp().ln_1p()
    }

    fn grad_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]) {
        let x = self.x(node);
        let scale = 0.5 * (dot(w, x) / 2.0).tanh();
        out.iter_mut().zip(x).for_each(|(o, xi)| *o = scale * xi);
    }

    fn hessian_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]) {
        let x = self.x(node);
        let th = (dot(w, x) / 2.0).tanh();
        let sech2 = 1.0 - th * th;
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[r * self.dim + c] = 0.25 * sech2 * x[r] * x[c];
            }
        }
    }

    fn fim_norm_bound(&self, node: usize) -> f64 {
        dot(self.x(node), self.x(node)) / 4.0
    }

    fn features(&self, node: usize) -> Option<&[f64]> {
        Some(self.x(node))
    }
}

/// Scalar signal in noise `y_i = w_i + ε_i`: the Gaussian model with `d = 1`, `x_i = 1`.
#[derive(Debug, Clone)]
pub struct ScalarSignalModel(GaussianLinearModel);

impl ScalarSignalModel {
    pub fn new(labels: Vec<f64>, variance: f64) -> Result<Self> {
        let n = labels.len();
        Ok(Self(GaussianLinearModel::new(
            1,
            vec![1.0; n],
            labels,
            Some(vec![variance; n]),
        )?))
    }

    pub fn as_gaussian(&self) -> &GaussianLinearModel {
        &self.0
    }

    pub fn into_gaussian(self) -> GaussianLinearModel {
        self.0
    }
}

impl ExpFamilyModel for ScalarSignalModel {
    fn node_count(&self) -> usize {
        self.0.node_count()
    }
    fn dim(&self) -> usize {
        1
    }
    fn sufficient_statistic(&self, node: usize) -> &[f64] {
        self.0.sufficient_statistic(node)
    }
    fn log_partition(&self, node: usize, w: &[f64]) -> f64 {
        self.0.log_partition(node, w)
    }
    fn grad_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]) {
        self.0.grad_log_partition(node, w, out)
    }
    fn hessian_log_partition(&self, node: usize, w: &[f64], out: &mut [f64]) {
        self.0.hessian_log_partition(node, w, out)
    }
    fn fim_norm_bound(&self, node: usize) -> f64 {
        self.0.fim_norm_bound(node)
    }
    fn fim_lower_bound(&self, node: usize) -> f64 {
        self.0.fim_lower_bound(node)
    }
    fn is_quadratic(&self) -> bool {
        true
    }
    fn exact_primal_update(&self, node: usize, w_bar: &[f64], tilde_tau: f64) -> Option<Vec<f64>> {
        self.0.exact_primal_update(node, w_bar, tilde_tau)
    }
    fn features(&self, node: usize) -> Option<&[f64]> {
        self.0.features(node)
    }
}

/// Either built-in model, as loaded from an instance bundle.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Gaussian(GaussianLinearModel),
    Logistic(LogisticModel),
}

impl AnyModel {
    pub fn as_dyn(&self) -> &dyn ExpFamilyModel {
        match self {
            AnyModel::Gaussian(m) => m,
            AnyModel::Logistic(m) => m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central_grad(model: &dyn ExpFamilyModel, node: usize, w: &[f64], h: f64) -> Vec<f64> {
        (0..w.len())
            .map(|k| {
                let mut p = w.to_vec();
                let mut m = w.to_vec();
                p[k] += h;
                m[k] -= h;
                (model.log_partition(node, &p) - model.log_partition(node, &m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gaussian_nll_example() {
        let model = GaussianLinearModel::new(1, vec![1.0], vec![1.0], None).unwrap();
        let w = NodeSignal::from_flat(1, vec![1.0]).unwrap();
        let m = TrainingSet::all(1).unwrap();
        assert!((neg_log_likelihood(&model, &w, &m).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_nll_at_zero_is_log2() {
        let model = LogisticModel::new(2, vec![1.0, 2.0, -3.0, 0.5, 0.0, 1.0], vec![1.0, -1.0, 1.0]).unwrap();
        let w = NodeSignal::zeros(3, 2);
        let m = TrainingSet::all(3).unwrap();
        assert!((neg_log_likelihood(&model, &w, &m).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_nodes_leave_average_unchanged() {
        let single = GaussianLinearModel::new(1, vec![2.0], vec![0.7], None).unwrap();
        let doubled = GaussianLinearModel::new(1, vec![2.0, 2.0], vec![0.7, 0.7], None).unwrap();
        let a = neg_log_likelihood(
            &single,
            &NodeSignal::from_flat(1, vec![0.3]).unwrap(),
            &TrainingSet::all(1).unwrap(),
        )
        .unwrap();
        let b = neg_log_likelihood(
            &doubled,
            &NodeSignal::from_flat(1, vec![0.3, 0.3]).unwrap(),
            &TrainingSet::all(2).unwrap(),
        )
        .unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let logistic = LogisticModel::new(2, vec![2.0, 0.0], vec![1.0]).unwrap();
        let g = grad_log_partition(&logistic, 0, &[1.0, 0.0]);
        let fd = central_grad(&logistic, 0, &[1.0, 0.0], 1e-5);
        assert!((g[0] - 1f64.tanh()).abs() < 1e-15);
        assert!((g[0] - fd[0]).abs() < 1e-9);
        assert!((g[0] - 0.76159).abs() < 1e-5);
        assert_eq!(g[1], 0.0);
        assert_eq!(grad_log_partition(&logistic, 0, &[0.0, 0.0]), vec![0.0, 0.0]);

        let gaussian = GaussianLinearModel::new(1, vec![1.0], vec![0.0], None).unwrap();
        assert_eq!(grad_log_partition(&gaussian, 0, &[3.0]), vec![3.0]);
    }

    #[test]
    fn fim_bounds() {
        let gaussian = GaussianLinearModel::new(2, vec![3.0, 4.0], vec![1.0], None).unwrap();
        assert_eq!(gaussian.fim_norm_bound(0), 25.0);
        assert_eq!(gaussian.fim_lower_bound(0), 0.0);
        let logistic = LogisticModel::new(2, vec![2.0, 0.0, 0.0, 0.0], vec![1.0, -1.0]).unwrap();
        assert_eq!(logistic.fim_norm_bound(0), 1.0);
        assert_eq!(logistic.fim_norm_bound(1), 0.0);
        let scalar = ScalarSignalModel::new(vec![1.0], 0.5).unwrap();
        assert_eq!(scalar.fim_lower_bound(0), 2.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let model = LogisticModel::new(1, vec![1.0], vec![1.0]).unwrap();
        for s in [-1e4, -700.0, -1.0, 0.0, 2.5, 800.0, 1e4] {
            let phi = model.log_partition(0, &[s]);
            let reference = s.abs() / 2.0 + (1.0 + (-s.abs()).exp()).ln();
            assert!(phi.is_finite());
            assert!((phi - reference).abs() <= 1e-12 * reference.max(1.0));
        }
    }

    #[test]
    fn binary_labels_are_mapped() {
        let model = LogisticModel::from_binary_labels(1, vec![1.0, 1.0], &[0.0, 1.0]).unwrap();
        assert_eq!(model.labels(), &[-1.0, 1.0]);
        assert!(LogisticModel::new(1, vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn gaussian_mean_property() {
        // ∇Φ(w̄) = E{t} = (w̄ᵀx/σ²) x when y ~ N(w̄ᵀx, σ²)
        let model = GaussianLinearModel::new(2, vec![0.6, -0.8], vec![f64::NAN], Some(vec![0.25])).unwrap();
        let w_bar = [1.5, 0.5];
        let mean_y = 1.5 * 0.6 - 0.5 * 0.8;
        let expected: Vec<f64> = [0.6, -0.8].iter().map(|x| mean_y / 0.25 * x).collect();
        let g = grad_log_partition(&model, 0, &w_bar);
        assert!((g[0] - expected[0]).abs() < 1e-14 && (g[1] - expected[1]).abs() < 1e-14);
        assert!(!model.is_observed(0));
    }

    #[test]
    fn sherman_morrison_solves_normal_equations() {
        let model = GaussianLinearModel::new(3, vec![0.5, -1.0, 2.0], vec![0.7], Some(vec![0.3])).unwrap();
        let w_bar = [0.2, -0.1, 0.4];
        let tt = 1.7;
        let w = model.exact_primal_update(0, &w_bar, tt).unwrap();
        // gradient of -wᵀt + Φ(w) + τ̃||w - w̄||²
        let g = grad_log_partition(&model, 0, &w);
        let t = model.sufficient_statistic(0);
        for k in 0..3 {
            let r = -t[k] + g[k] + 2.0 * tt * (w[k] - w_bar[k]);
            assert!(r.abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn model_construction_errors() {
        assert!(GaussianLinearModel::new(2, vec![1.0], vec![1.0], None).is_err());
        assert!(GaussianLinearModel::new(1, vec![1.0], vec![1.0], Some(vec![0.0])).is_err());
        assert!(GaussianLinearModel::new(0, vec![], vec![], None).is_err());
    }

    fn random_models(seed_x: Vec<f64>) -> (GaussianLinearModel, LogisticModel) {
        let d = seed_x.len();
        (
            GaussianLinearModel::new(d, seed_x.clone(), vec![0.3], Some(vec![0.7])).unwrap(),
            LogisticModel::new(d, seed_x, vec![-1.0]).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            x in prop::collection::vec(-2.0f64..2.0, 3),
            w in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let (g, l) = random_models(x);
            for model in [&g as &dyn ExpFamilyModel, &l] {
                let exact = grad_log_partition(model, 0, &w);
                let fd = central_grad(model, 0, &w, 1e-5);
                for (a, b) in exact.iter().zip(&fd) {
                    prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn gradient_is_monotone(
            x in prop::collection::vec(-2.0f64..2.0, 2),
            w1 in prop::collection::vec(-5.0f64..5.0, 2),
            w2 in prop::collection::vec(-5.0f64..5.0, 2),
        ) {
            let (g, l) = random_models(x);
            for model in [&g as &dyn ExpFamilyModel, &l] {
                let g1 = grad_log_partition(model, 0, &w1);
                let g2 = grad_log_partition(model, 0, &w2);
                let inner: f64 = (0..2).map(|k| (g1[k] - g2[k]) * (w1[k] - w2[k])).sum();
                prop_assert!(inner >= -1e-12);
            }
        }

        #[test]
        fn hessian_within_declared_bounds(
            x in prop::collection::vec(-2.0f64..2.0, 2),
            w in prop::collection::vec(-3.0f64..3.0, 2),
            v in prop::collection::vec(-1.0f64..1.0, 2),
        ) {
            let vn = (v[0] * v[0] + v[1] * v[1]).sqrt();
            prop_assume!(vn > 1e-3);
            let (g, l) = random_models(x);
            for model in [&g as &dyn ExpFamilyModel, &l] {
                // finite-difference Hessian from the exact gradient
                let h = 1e-5;
                let mut quad = 0.0;
                for r in 0..2 {
                    let mut p = w.clone();
                    let mut m = w.clone();
                    p[r] += h;
                    m[r] -= h;
                    let gp = grad_log_partition(model, 0, &p);
                    let gm = grad_log_partition(model, 0, &m);
                    for c in 0..2 {
                        quad += v[r] * (gp[c] - gm[c]) / (2.0 * h) * v[c];
                    }
                }
                let q = quad / (vn * vn);
                prop_assert!(q <= model.fim_norm_bound(0) + 1e-6);
                prop_assert!(q >= model.fim_lower_bound(0) - 1e-6);
                let mut hess = vec![0.0; 4];
                model.hessian_log_partition(0, &w, &mut hess);
                let exact: f64 = (0..2).flat_map(|r| (0..2).map(move |c| (r, c)))
                    .map(|(r, c)| v[r] * hess[r * 2 + c] * v[c]).sum::<f64>() / (vn * vn);
                prop_assert!((exact - q).abs() < 1e-6);
            }
        }
    }
}
