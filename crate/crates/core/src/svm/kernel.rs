use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest training set for which pairwise distances and kernel values are
/// held as dense `n × n` matrices (about 0.5 GB each at the limit).
pub const DENSE_LIMIT: usize = 8_000;

/// `exp(−gamma · ‖a − b‖²)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    Ok((-gamma * sq_dist(a, b)).exp())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    // Four independent partial sums so the loop vectorizes; the summation
    // order is still fixed.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dense symmetric matrix of squared Euclidean distances, row-major.
pub(crate) struct SqDistances {
    n: usize,
    data: Vec<f64>,
}

impl SqDistances {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, out)| {
            for (j, o) in out[..i].iter_mut().enumerate() {
                *o = sq_dist(&rows[i], &rows[j]);
            }
        });
        for i in 0..n {
            for j in i + 1..n {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self { n, data }
    }
}

/// Kernel values on the training set, either precomputed or evaluated on
/// demand.
pub(crate) enum KernelMatrix<'a> {
    Dense { n: usize, data: Vec<f64> },
    Lazy { rows: &'a [Vec<f64>], gamma: f64 },
}

impl<'a> KernelMatrix<'a> {
    pub fn from_distances(d: &SqDistances, gamma: f64) -> KernelMatrix<'static> {
        let mut data = vec![0.0; d.data.len()];
        data.par_iter_mut()
            .zip(d.data.par_iter())
            .for_each(|(k, &d2)| *k = (-gamma * d2).exp());
        KernelMatrix::Dense { n: d.n, data }
    }

    pub fn lazy(rows: &'a [Vec<f64>], gamma: f64) -> Self {
        KernelMatrix::Lazy { rows, gamma }
    }

    pub fn diag(&self, _i: usize) -> f64 {
        1.0
    }

    pub fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            KernelMatrix::Dense { n, data } => Cow::Borrowed(&data[i * n..(i + 1) * n]),
            KernelMatrix::Lazy { rows, gamma } => Cow::Owned(
                rows.iter()
                    .map(|r| (-gamma * sq_dist(&rows[i], r)).exp())
                    .collect(),
            ),
        }
    }
}
