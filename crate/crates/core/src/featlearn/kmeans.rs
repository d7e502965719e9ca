//! Lloyd's algorithm with k-means++ seeding and restarts.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Patch;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once an iteration lowers the objective by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 1,
            max_iters: 300,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "k-means restarts and max_iters must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config(format!(
                "k-means rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Result of the best restart.
#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances of `centroids`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every assignment step of the winning restart.
    pub trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Row-major point matrix.
struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `patches` into `k` centroids, keeping the restart with the lowest
/// objective (ties go to the lower restart index).
pub fn kmeans_fit(patches: &[Patch], k: usize, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::Config("k-means needs K >= 1".into()));
    }
    if patches.len() < k {
        return Err(Error::Input(format!(
            "{} patches cannot form {k} clusters",
            patches.len()
        )));
    }
    let dim = patches[0].dim();
    let mut data = Vec::with_capacity(patches.len() * dim);
    for p in patches {
        if p.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: p.dim(),
            });
        }
        if p.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("patch values must be finite".into()));
        }
        data.extend_from_slice(p.values());
    }
    if dim == 0 {
        return Err(Error::Input("patches must have positive dimension".into()));
    }
    let points = Points { data: &data, dim };

    let fits: Vec<KMeansFit> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            lloyd(&points, k, cfg, &mut rng, r)
        })
        .collect();
    Ok(fits
        .into_iter()
        .reduce(|best, f| if f.objective < best.objective { f } else { best })
        .expect("at least one restart"))
}

fn kmeans_plus_plus(points: &Points, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points.get(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.get(i), &centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // Every point coincides with a chosen centroid.
            Err(_) => rng.random_range(0..n),
        };
        let c = points.get(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.get(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Assigns every point to its nearest centroid (lowest index on ties).
/// Returns the objective, summed in point order.
fn assign(points: &Points, centroids: &[Vec<f64>], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    labels
        .par_iter_mut()
        .zip(dists.par_iter_mut())
        .enumerate()
        .for_each(|(i, (label, dist))| {
            let p = points.get(i);
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            *label = best.0;
            *dist = best.1;
        });
    dists.iter().sum()
}

fn update(points: &Points, labels: &[usize], dists: &mut [f64], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sums = vec![vec![0.0; points.dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(points.get(i)) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let n = counts[j] as f64;
            for (c, s) in centroids[j].iter_mut().zip(&sums[j]) {
                *c = s / n;
            }
        } else {
            // Empty cluster: move it onto the point worst served by its own centroid.
            let far = dists
                .iter()
                .enumerate()
                .fold(0, |best, (i, &d)| if d > dists[best] { i } else { best });
            centroids[j].copy_from_slice(points.get(far));
            dists[far] = 0.0;
        }
    }
}

fn lloyd(points: &Points, k: usize, cfg: &KMeansConfig, rng: &mut impl Rng, restart: usize) -> KMeansFit {
    let n = points.len();
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let objective = assign(points, &centroids, &mut labels, &mut dists);
        iterations += 1;
        if let Some(&prev) = trace.last() {
            if prev - objective <= cfg.rel_tol * prev {
                converged = true;
            }
        }
        trace.push(objective);
        if objective == 0.0 {
            converged = true;
        }
        update(points, &labels, &mut dists, &mut centroids);
        if converged {
            break;
        }
    }
    let objective = assign(points, &centroids, &mut labels, &mut dists);
    trace.push(objective);
    KMeansFit {
        centroids,
        objective,
        iterations,
        converged,
        trace,
        restart,
    }
}
