//! Networked exponential families: per-node exponential-family models whose
//! parameters vary little across the edges of a known graph, learned by
//! network Lasso with a preconditioned primal-dual solver.

pub mod analysis;
pub mod bundle;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod family;
pub mod graph;
pub mod rnc;
pub mod signal;
pub mod solver;
pub mod training;

pub use error::{Error, Result};
