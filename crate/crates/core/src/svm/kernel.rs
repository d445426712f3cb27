use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of `K(x, z) = exp(−γ‖x − z‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernelParams {
    pub gamma: f64,
}

impl RbfKernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Input(format!("gamma must be finite and positive, got {gamma}")));
        }
        Ok(RbfKernelParams { gamma })
    }
}

pub(crate) fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Input(format!(
            "kernel arguments differ in dimension: {} vs {}",
            x.len(),
            z.len()
        )));
    }
    Ok((-gamma * squared_distance(x, z)).exp())
}

/// Dense symmetric kernel matrix over a training set.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn rbf(xs: &[&[f64]], gamma: f64) -> Self {
        let n = xs.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j {
                    1.0
                } else {
                    (-gamma * squared_distance(xs[i], xs[j])).exp()
                };
            }
        });
        Gram { n, data }
    }

    /// Kernel over the `subset` rows/columns of a precomputed squared-distance matrix.
    pub fn from_distances(dist: &DistanceMatrix, subset: &[usize], gamma: f64) -> Self {
        let n = subset.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            let drow = dist.row(subset[i]);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (-gamma * drow[subset[j]]).exp();
            }
        });
        Gram { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Pairwise squared Euclidean distances, shared across γ values during
/// cross-validation.
#[derive(Debug, Clone)]
pub(crate) struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(xs: &[&[f64]]) -> Self {
        let n = xs.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = squared_distance(xs[i], xs[j]);
            }
        });
        DistanceMatrix { n, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}
