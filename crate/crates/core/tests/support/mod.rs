//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod bigfloat;
pub mod checks;
pub mod graphs;
pub mod grid;

/// Outcome of one check: `Ok` carries a short measurement, `Err` the reason.
pub type Check = Result<String, String>;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
