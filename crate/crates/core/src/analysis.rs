//! Error metrics and diagnostics for clustered graph signals.
//!
//! Besides NMSE this holds the recovery tail bound with its prescribed `λ`,
//! plus a sampling estimate of the compatibility constant. The incidence
//! pseudo-inverse bound lives here too.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{partition_spectral_gap, spectral_gap, EmpiricalGraph, Partition};
use crate::signal::NodeSignal;
use crate::training::TrainingSet;

/// Largest graph for which the exact pseudo-inverse norm is computed.
pub const PSEUDO_INVERSE_LIMIT: usize = 200;

/// `||w_bar - w_hat||² / ||w_bar||²`.
pub fn nmse(w_hat: &NodeSignal, w_bar: &NodeSignal) -> Result<f64> {
    w_hat.check_shape(w_bar.len(), Some(w_bar.dim()))?;
    let denom = w_bar.norm_squared();
    if denom == 0.0 {
        return Err(Error::Domain("NMSE undefined for an all-zero reference signal".into()));
    }
    let num: f64 = w_hat
        .as_slice()
        .iter()
        .zip(w_bar.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / denom)
}

/// `sqrt((1/M) Σ_{i∈M} ||z_i||²)`.
pub fn training_norm(z: &NodeSignal, training: &TrainingSet) -> f64 {
    let s: f64 = training.iter().map(|i| z.block_norm(i).powi(2)).sum();
    (s / training.len() as f64).sqrt()
}

/// Piecewise-constant signal: value `values[l]` on every node of cluster `l`.
#[derive(Debug, Clone)]
pub struct ClusteredSignalSpec {
    pub partition: Partition,
    pub values: Vec<Vec<f64>>,
}

pub fn expand_clustered(spec: &ClusteredSignalSpec) -> Result<NodeSignal> {
    let p = &spec.partition;
    if spec.values.len() != p.cluster_count() {
        return Err(Error::DimensionMismatch {
            what: "cluster value count",
            expected: p.cluster_count(),
            got: spec.values.len(),
        });
    }
    let dim = spec.values[0].len();
    if dim == 0 || spec.values.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("cluster values must share a positive dimension"));
    }
    let mut data = Vec::with_capacity(p.node_count() * dim);
    for &c in p.assignment() {
        data.extend_from_slice(&spec.values[c]);
    }
    NodeSignal::from_flat(dim, data)
}

/// Inputs of the recovery tail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    /// Compatibility constants `K` and `L`.
    pub asspt3_k: f64,
    pub asspt3_l: f64,
    /// Upper bound `U` on the Fisher information.
    pub fim_upper: f64,
    /// FIM lower bound; reported only, the bound does not use it.
    pub asspt2_l: Option<f64>,
    pub dim: usize,
    pub cluster_sizes: Vec<usize>,
    pub training_size: usize,
    pub partition_gap: f64,
    /// Largest edge weight.
    pub max_weight: f64,
    pub edge_count: usize,
    /// Target TV error `η`.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    /// `(K+3)/(L-3)`, used by the bound.
    pub kappa: f64,
    /// `(K+1)/(L-1)`, the constant appearing in the proof.
    pub kappa_proof: f64,
    /// Prescribed regularization `η / (5κ²)`.
    pub lambda: f64,
    pub cluster_term: f64,
    pub edge_term: f64,
    pub bound: f64,
    /// The bound exceeds 1 and says nothing about the probability.
    pub vacuous: bool,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Theorem1Params {
    pub fn validate(&self) -> Result<()> {
        let (k, l) = (self.asspt3_k, self.asspt3_l);
        if !(l.is_finite() && l > 3.0) {
            return Err(Error::Domain(format!("compatibility constant L must exceed 3, got {l}")));
        }
        if !(k > 1.0 && k < l - 2.0) {
            return Err(Error::Domain(format!(
                "compatibility constant K must lie in (1, L-2) = (1, {}), got {k}",
                l - 2.0
            )));
        }
        let kappa = (k + 3.0) / (l - 3.0);
        if kappa <= 1.0 {
            return Err(Error::Domain(format!("kappa = (K+3)/(L-3) must exceed 1, got {kappa}")));
        }
        positive("U", self.fim_upper)?;
        positive("partition gap", self.partition_gap)?;
        positive("max edge weight", self.max_weight)?;
        positive("eta", self.eta)?;
        if self.dim == 0 || self.training_size == 0 {
            return Err(Error::Domain("dimension and training size must be positive".into()));
        }
        if self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0) {
            return Err(Error::Domain("cluster sizes must be nonempty and positive".into()));
        }
        Ok(())
    }
}

pub fn theorem1_bound(p: &Theorem1Params) -> Result<Theorem1Report> {
    p.validate()?;
    let (k, l) = (p.asspt3_k, p.asspt3_l);
    let kappa = (k + 3.0) / (l - 3.0);
    let kappa_sq = kappa * kappa;
    let d = p.dim as f64;
    let u = p.fim_upper;
    let eta_sq = p.eta * p.eta;
    let smallest = *p.cluster_sizes.iter().min().expect("validated nonempty") as f64;

    let cluster_term = 2.0 * p.cluster_sizes.len() as f64 * (-smallest * eta_sq / (8.0 * 25.0 * d * u * kappa_sq)).exp();
    let edge_term = 2.0
        * p.edge_count as f64
        * (-(p.training_size as f64) * p.partition_gap.powi(2) * eta_sq
            / (64.0 * 25.0 * u * d * p.max_weight.powi(2) * kappa_sq * kappa_sq))
            .exp();
    let bound = cluster_term + edge_term;
    Ok(Theorem1Report {
        kappa,
        kappa_proof: (k + 1.0) / (l - 1.0),
        lambda: p.eta / (5.0 * kappa_sq),
        cluster_term,
        edge_term,
        bound,
        vacuous: bound > 1.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityEstimate {
    /// Largest `(L||z||_∂ - ||z||_int) / ||z||_M` seen, clamped at 0. A lower
    /// estimate of the smallest valid `K`; infinite when a sample with
    /// boundary variation vanishes on the training set.
    pub k_est: f64,
    pub worst_signal: Option<NodeSignal>,
    pub samples: usize,
}

/// Randomized check of the compatibility inequality
/// `L ||z||_∂ ≤ K ||z||_M + ||z||_int` over piecewise-constant signals on `p`.
pub fn compatibility_ratio(
    g: &EmpiricalGraph,
    p: &Partition,
    training: &TrainingSet,
    dim: usize,
    asspt3_l: f64,
    samples: usize,
    seed: u64,
) -> Result<CompatibilityEstimate> {
    p.validate(g)?;
    if training.node_count() != g.node_count() {
        return Err(Error::DimensionMismatch {
            what: "training set universe",
            expected: g.node_count(),
            got: training.node_count(),
        });
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let boundary = p.boundary_edges(g);
    let interior = p.interior_edges(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = CompatibilityEstimate {
        k_est: 0.0,
        worst_signal: None,
        samples,
    };
    for _ in 0..samples {
        let mut values: Vec<Vec<f64>> = (0..p.cluster_count())
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let total: f64 = values.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if total == 0.0 {
            continue;
        }
        values.iter_mut().flatten().for_each(|v| *v /= total);
        let z = expand_clustered(&ClusteredSignalSpec {
            partition: p.clone(),
            values,
        })?;
        let excess = asspt3_l * g.tv_norm(&z, Some(&boundary))? - g.tv_norm(&z, Some(&interior))?;
        if excess <= 0.0 {
            continue;
        }
        let mass = training_norm(&z, training);
        let ratio = if mass > 0.0 { excess / mass } else { f64::INFINITY };
        if ratio > best.k_est {
            best.k_est = ratio;
            best.worst_signal = Some(z);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoInverseBound {
    /// `sqrt(2 d max A) / ρ(G)`.
    pub bound: f64,
    /// Largest block norm over all column blocks of `D†`, when computed.
    pub exact: Option<f64>,
}

impl PseudoInverseBound {
    pub fn holds(&self) -> Option<bool> {
        self.exact.map(|e| e <= self.bound * (1.0 + 1e-12))
    }
}

/// Column bound for the pseudo-inverse of the block incidence matrix; the
/// exact value is computed densely for graphs up to [`PSEUDO_INVERSE_LIMIT`] nodes.
pub fn pseudo_inverse_column_bound(g: &EmpiricalGraph, dim: usize) -> Result<PseudoInverseBound> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let rho = spectral_gap(g)?;
    let bound = (2.0 * dim as f64 * g.max_weight()).sqrt() / rho;
    let exact = if g.node_count() <= PSEUDO_INVERSE_LIMIT {
        // D† = D_s† ⊗ I_d, so every block is a scalar entry times the identity.
        // D_s† = (D_sᵀD_s)† D_sᵀ; the symmetric eigensolver is more reliable here
        // than an SVD of the rectangular D_s.
        let mut d = DMatrix::zeros(g.edge_count(), g.node_count());
        for (e, edge) in g.edges().iter().enumerate() {
            d[(e, edge.low)] = edge.weight;
            d[(e, edge.high)] = -edge.weight;
        }
        let eig = SymmetricEigen::new(d.transpose() * &d);
        let top = eig.eigenvalues.amax();
        let n = g.node_count();
        let mut gram_pinv = DMatrix::zeros(n, n);
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            // a connected graph has exactly one zero eigenvalue
            if ev > 1e-10 * top {
                let v = eig.eigenvectors.column(k);
                gram_pinv += (v * v.transpose()) / ev;
            }
        }
        let pinv = gram_pinv * d.transpose();
        Some(pinv.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    } else {
        None
    };
    Ok(PseudoInverseBound { bound, exact })
}

/// User-supplied constants for a diagnostic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticParams {
    #[serde(rename = "K")]
    pub asspt3_k: f64,
    #[serde(rename = "L")]
    pub asspt3_l: f64,
    #[serde(rename = "U")]
    pub fim_upper: f64,
    #[serde(default)]
    pub asspt2_l: Option<f64>,
    pub eta: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub spectral_gap: f64,
    pub partition_gap: f64,
    pub kappa: f64,
    pub kappa_proof: f64,
    pub lambda_prescribed: f64,
    pub bound_value: f64,
    pub vacuous: bool,
    #[serde(rename = "K_est")]
    pub k_est: f64,
    pub asspt3_l: f64,
    pub asspt2_l: Option<f64>,
    pub samples: usize,
}

pub fn diagnostic_report(
    g: &EmpiricalGraph,
    p: &Partition,
    training: &TrainingSet,
    dim: usize,
    params: &DiagnosticParams,
    seed: u64,
) -> Result<DiagnosticReport> {
    p.validate(g)?;
    let gap = spectral_gap(g)?;
    let partition_gap = partition_spectral_gap(g, p)?;
    let theorem = theorem1_bound(&Theorem1Params {
        asspt3_k: params.asspt3_k,
        asspt3_l: params.asspt3_l,
        fim_upper: params.fim_upper,
        asspt2_l: params.asspt2_l,
        dim,
        cluster_sizes: p.clusters().iter().map(Vec::len).collect(),
        training_size: training.len(),
        partition_gap,
        max_weight: g.max_weight(),
        edge_count: g.edge_count(),
        eta: params.eta,
    })?;
    let compat = compatibility_ratio(g, p, training, dim, params.asspt3_l, params.samples, seed)?;
    Ok(DiagnosticReport {
        spectral_gap: gap,
        partition_gap,
        kappa: theorem.kappa,
        kappa_proof: theorem.kappa_proof,
        lambda_prescribed: theorem.lambda,
        bound_value: theorem.bound,
        vacuous: theorem.vacuous,
        k_est: compat.k_est,
        asspt3_l: params.asspt3_l,
        asspt2_l: params.asspt2_l,
        samples: params.samples,
    })
}
