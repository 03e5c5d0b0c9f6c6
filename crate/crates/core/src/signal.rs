//! Vector-valued signals on the nodes and on the edges of an empirical graph.
//!
//! Both are stored as one contiguous buffer of `len * dim` reals, block `k`
//! occupying `data[k * dim..(k + 1) * dim]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! block_signal {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            dim: usize,
            data: Vec<f64>,
        }

        impl $name {
            pub fn zeros(len: usize, dim: usize) -> Self {
                assert!(dim > 0, "signal dimension must be positive");
                Self { dim, data: vec![0.0; len * dim] }
            }

            /// Builds a signal from a flat buffer of `len * dim` values.
            pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
                if dim == 0 {
                    return Err(Error::invalid("signal dimension must be positive"));
                }
                if data.len() % dim != 0 {
                    return Err(Error::invalid(format!(
                        "{} buffer of length {} is not a multiple of dimension {}",
                        $what,
                        data.len(),
                        dim
                    )));
                }
                Ok(Self { dim, data })
            }

            pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
                let dim = blocks.first().map(|b| b.as_ref().len()).unwrap_or(1);
                let mut data = Vec::with_capacity(blocks.len() * dim);
                for (k, b) in blocks.iter().enumerate() {
                    let b = b.as_ref();
                    if b.len() != dim {
                        return Err(Error::invalid(format!(
                            "{} block {} has dimension {}, expected {}",
                            $what,
                            k,
                            b.len(),
                            dim
                        )));
                    }
                    data.extend_from_slice(b);
                }
                Self::from_flat(dim, data)
            }

            /// Signal with every block equal to `value`.
            pub fn constant(len: usize, value: &[f64]) -> Self {
                let mut data = Vec::with_capacity(len * value.len());
                for _ in 0..len {
                    data.extend_from_slice(value);
                }
                Self { dim: value.len(), data }
            }

            pub fn len(&self) -> usize {
                self.data.len() / self.dim
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            pub fn block(&self, k: usize) -> &[f64] {
                &self.data[k * self.dim..(k + 1) * self.dim]
            }

            pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
                &mut self.data[k * self.dim..(k + 1) * self.dim]
            }

            pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
                self.data.chunks_exact(self.dim)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.data
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }

            pub fn dot(&self, other: &Self) -> f64 {
                debug_assert_eq!(self.data.len(), other.data.len());
                self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
            }

            pub fn norm_squared(&self) -> f64 {
                self.dot(self)
            }

            pub fn norm(&self) -> f64 {
                self.norm_squared().sqrt()
            }

            /// Euclidean norm of block `k`.
            pub fn block_norm(&self, k: usize) -> f64 {
                norm(self.block(k))
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }

            pub(crate) fn check_shape(&self, len: usize, dim: Option<usize>) -> Result<()> {
                if self.len() != len {
                    return Err(Error::DimensionMismatch {
                        what: concat!($what, " block count"),
                        expected: len,
                        got: self.len(),
                    });
                }
                if let Some(d) = dim {
                    if d != self.dim {
                        return Err(Error::DimensionMismatch {
                            what: concat!($what, " block dimension"),
                            expected: d,
                            got: self.dim,
                        });
                    }
                }
                Ok(())
            }
        }
    };
}

block_signal!(
    /// One `d`-vector per node: weights, true weights, corrected iterates.
    NodeSignal,
    "node signal"
);

block_signal!(
    /// One `d`-vector per edge: dual variables and incidence outputs.
    EdgeSignal,
    "edge signal"
);

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
