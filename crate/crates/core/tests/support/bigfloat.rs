//! Arbitrary-precision evaluation of the recovery tail bound.

use dashu_float::FBig;
use nexfam::analysis::Theorem1Params;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const BITS: usize = 320;

fn big(v: f64) -> FBig {
    FBig::try_from(v).expect("finite input").with_precision(BITS).value()
}

/// `2|P| exp(-min|C| η² / (200 d U κ²)) + 2|E| exp(-M ρ² η² / (1600 U d A² κ⁴))`
/// with `κ = (K+3)/(L-3)`, evaluated in 320-bit binary floating point.
pub fn bound_exact(p: &Theorem1Params) -> f64 {
    let kappa = (big(p.asspt3_k) + big(3.0)) / (big(p.asspt3_l) - big(3.0));
    let kappa2 = &kappa * &kappa;
    let eta2 = big(p.eta) * big(p.eta);
    let d = big(p.dim as f64);
    let u = big(p.fim_upper);
    let smallest = big(*p.cluster_sizes.iter().min().unwrap() as f64);
    let clusters = big(p.cluster_sizes.len() as f64);

    let cluster_exp = -(smallest * &eta2) / (big(8.0) * big(25.0) * &d * &u * &kappa2);
    let cluster_term = big(2.0) * clusters * cluster_exp.exp();

    let rho2 = big(p.partition_gap) * big(p.partition_gap);
    let a2 = big(p.max_weight) * big(p.max_weight);
    let edge_exp = -(big(p.training_size as f64) * rho2 * &eta2) / (big(64.0) * big(25.0) * &u * &d * a2 * &kappa2 * &kappa2);
    let edge_term = big(2.0) * big(p.edge_count as f64) * edge_exp.exp();

    (cluster_term + edge_term).to_f64().value()
}

/// Parameters spread over the admissible region `1 < K < L-2`, `κ > 1`,
/// with exponents small enough that both terms stay representable.
pub fn parameter_grid(rng: &mut ChaCha8Rng, count: usize) -> Vec<Theorem1Params> {
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1.1..6.0);
            // κ > 1 needs L < K+6, K < L-2 needs L > K+2
            let l = k + rng.gen_range(2.05..5.95);
            let clusters = rng.gen_range(1..=8);
            Theorem1Params {
                asspt3_k: k,
                asspt3_l: l,
                fim_upper: rng.gen_range(0.25..2.0),
                asspt2_l: None,
                dim: rng.gen_range(1..=3),
                cluster_sizes: (0..clusters).map(|_| rng.gen_range(5..=200)).collect(),
                training_size: rng.gen_range(1..=500),
                partition_gap: rng.gen_range(0.01..2.0),
                max_weight: rng.gen_range(0.5..3.0),
                edge_count: rng.gen_range(1..=5000),
                eta: rng.gen_range(0.1..3.0),
            }
        })
        .collect()
}
