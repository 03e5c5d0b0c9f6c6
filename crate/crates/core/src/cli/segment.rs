use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::history_csv;
use super::{csv_line, load_config, Run};
use crate::datagen::{image_to_instance, mask_image, read_ppm};
use crate::error::Result;
use crate::family::ExpFamilyModel;
use crate::signal::dot;
use crate::solver::{solve, PrimalUpdate, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub lambda: f64,
    pub iterations: usize,
    pub tau: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            iterations: 10,
            tau: SolverConfig::default().tau,
        }
    }
}

#[derive(Debug, Serialize)]
struct SegmentSummary {
    width: usize,
    height: usize,
    foreground_pixels: usize,
    seed_pixels: usize,
    /// Fraction of seed pixels whose predicted class equals their seed label.
    seed_agreement: f64,
    constant_channels: [bool; 3],
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub(super) fn cmd_segment(
    run: &mut Run,
    image: &Path,
    config: Option<&Path>,
    lambda: Option<f64>,
    iterations: Option<usize>,
) -> Result<()> {
    let mut cfg: SegmentConfig = load_config(config)?;
    cfg.lambda = lambda.unwrap_or(cfg.lambda);
    cfg.iterations = iterations.unwrap_or(cfg.iterations);
    run.set_config(&cfg)?;
    let img = run.phase("load", || read_ppm(image))?;
    let inst = run.phase("build", || image_to_instance(&img))?;
    let solver = SolverConfig {
        tau: cfg.tau,
        ..SolverConfig::new(cfg.lambda, cfg.iterations).with_primal_update(PrimalUpdate::NewtonStep)
    };
    let result = run.phase("solve", || solve(&inst.graph, &inst.model, &inst.training, &solver))?;

    let (w, h) = (img.width(), img.height());
    let mut table = String::from("pixel,row,col,score,probability,label,seed_label\n");
    let mut mask = Vec::with_capacity(w * h);
    let mut agree = 0usize;
    for i in 0..w * h {
        let x = inst.model.features(i).unwrap_or_default();
        let score = dot(result.weights.block(i), x);
        let fg = score > 0.0;
        let label = if fg { 1 } else { -1 };
        let seed = inst.model.label(i);
        let seed_text = if seed.is_nan() { String::new() } else { format!("{seed}") };
        if !seed.is_nan() && seed == f64::from(label) {
            agree += 1;
        }
        csv_line(
            &mut table,
            &[&(i + 1), &(i / w), &(i % w), &score, &logistic(score), &label, &seed_text],
        );
        mask.push(fg);
    }
    let summary = SegmentSummary {
        width: w,
        height: h,
        foreground_pixels: mask.iter().filter(|&&m| m).count(),
        seed_pixels: inst.training.len(),
        seed_agreement: agree as f64 / inst.training.len() as f64,
        constant_channels: inst.constant_channels,
    };
    run.write_ppm("mask.ppm", &mask_image(w, h, &mask)?)?;
    run.write_commented("scores.csv", &table)?;
    run.write_commented("history.csv", &history_csv(&result.history))?;
    run.write_json("summary.json", &summary)
}
