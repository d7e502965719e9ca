use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics_for_classifications;
use crate::datamodel::{Dataset, LabeledExample};
use crate::error::{Error, Result};
use crate::svm::{SolverConfig, SvmHyperparams, TrainingSet};

/// `c ∈ 2^-3..=2^7`, `gamma ∈ 2^-9..=2^1`.
pub fn default_grid() -> Vec<SvmHyperparams> {
    (-3..=7)
        .flat_map(|c| {
            (-9..=1).map(move |g| SvmHyperparams {
                c: 2f64.powi(c),
                gamma: 2f64.powi(g),
            })
        })
        .collect()
}

/// Mean held-out scores of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub hyperparams: SvmHyperparams,
    pub mean_pi: f64,
    pub mean_far: f64,
    /// Mean over folds, with each fold's longest incident window standing in
    /// when the fold detected nothing.
    pub mean_mttd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_hyperparams: SvmHyperparams,
    pub cv_pi: f64,
    pub fold_assignments: BTreeMap<String, usize>,
    pub scores: Vec<GridScore>,
}

/// Unit-grouped k-fold model selection minimizing mean held-out PI at pt = 0.
///
/// `examples[i].unit` indexes `units`, and examples of each unit appear in
/// interval order. Units are shuffled with `seed` and dealt round-robin into
/// folds. Ties on PI fall to lower FAR, then lower MTTD, then grid order.
pub fn cross_validate(
    examples: &[LabeledExample],
    units: &Dataset,
    grid: &[SvmHyperparams],
    folds: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CvResult> {
    let n_units = units.units().len();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n_units < folds {
        return Err(Error::Input(format!(
            "{n_units} units cannot be split into {folds} folds"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    for hp in grid {
        hp.validate()?;
    }

    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n_units];
    for (pos, &u) in order.iter().enumerate() {
        fold_of[u] = pos % folds;
    }

    // Grid points sharing a gamma share one kernel matrix.
    let mut gammas: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, hp) in grid.iter().enumerate() {
        match gammas.iter_mut().find(|(g, _)| *g == hp.gamma) {
            Some((_, idx)) => idx.push(i),
            None => gammas.push((hp.gamma, vec![i])),
        }
    }

    // [fold][grid] -> (pi, far, mttd)
    let mut fold_scores: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (train, held): (Vec<&LabeledExample>, Vec<&LabeledExample>) =
            examples.iter().partition(|e| fold_of[e.unit] != fold);
        let held_units: Vec<usize> = (0..n_units).filter(|&u| fold_of[u] == fold).collect();
        let held_ds = units.subset(&held_units);
        // Held-out examples regrouped in held_units order so classifications
        // line up with held_ds.
        let mut held_sorted = held;
        held_sorted.sort_by_key(|e| {
            (
                held_units.binary_search(&e.unit).unwrap_or(usize::MAX),
                e.t_index,
            )
        });

        let train_x: Vec<Vec<f64>> = train.iter().map(|e| e.features.clone()).collect();
        let train_y: Vec<bool> = train.iter().map(|e| e.incident).collect();
        let set = TrainingSet::new(&train_x, &train_y)?;
        let held_x: Vec<Vec<f64>> = held_sorted.iter().map(|e| e.features.clone()).collect();
        let queries = set.query_distances(&held_x)?;

        let per_gamma = gammas
            .par_iter()
            .map(|(gamma, idx)| {
                let cs: Vec<f64> = idx.iter().map(|&i| grid[i].c).collect();
                let fits = set.decision_values_many(*gamma, &cs, solver, &queries)?;
                idx.iter()
                    .zip(fits)
                    .map(|(&i, (_, values))| {
                        let classes: Vec<bool> = values.iter().map(|&v| v > 0.0).collect();
                        let m = metrics_for_classifications(&classes, &held_ds, 0)?;
                        let longest = held_ds
                            .units()
                            .iter()
                            .filter_map(|u| u.incident_window().map(|w| w.len()))
                            .max()
                            .unwrap_or(0) as f64;
                        Ok((i, (m.pi, m.far, m.mttd.unwrap_or(longest))))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut row = vec![(0.0, 0.0, 0.0); grid.len()];
        for (i, score) in per_gamma.into_iter().flatten() {
            row[i] = score;
        }
        fold_scores.push(row);
    }

    let nf = folds as f64;
    let scores: Vec<GridScore> = grid
        .iter()
        .enumerate()
        .map(|(i, hp)| GridScore {
            hyperparams: *hp,
            mean_pi: fold_scores.iter().map(|r| r[i].0).sum::<f64>() / nf,
            mean_far: fold_scores.iter().map(|r| r[i].1).sum::<f64>() / nf,
            mean_mttd: fold_scores.iter().map(|r| r[i].2).sum::<f64>() / nf,
        })
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.mean_pi
                .total_cmp(&b.mean_pi)
                .then(a.mean_far.total_cmp(&b.mean_far))
                .then(a.mean_mttd.total_cmp(&b.mean_mttd))
                .then(ia.cmp(ib))
        })
        .map(|(_, s)| s.clone())
        .expect("non-empty grid");

    Ok(CvResult {
        best_hyperparams: best.hyperparams,
        cv_pi: best.mean_pi,
        fold_assignments: units
            .units()
            .iter()
            .zip(&fold_of)
            .map(|(u, &f)| (u.unit_id().to_owned(), f))
            .collect(),
        scores,
    })
}
