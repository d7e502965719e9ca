//! Soft-margin (hinge-loss) SVM with an RBF kernel, trained by SMO on
//! standardized features.

mod kernel;
mod smo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use kernel::{KernelMatrix, SqDistances};

pub use kernel::{rbf_kernel, DENSE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparams {
    /// Soft-margin penalty.
    pub c: f64,
    /// RBF width.
    pub gamma: f64,
}

impl SvmHyperparams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        let hp = Self { c, gamma };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop when the maximal KKT violation gap falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the dual objective after every pair update.
    #[serde(default)]
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000_000,
            trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainStatus {
    pub iterations: usize,
    /// Largest KKT residual on the training margins.
    pub kkt_violation: f64,
    pub converged: bool,
    /// `Σα − ½ αᵀQα` at the solution.
    pub dual_objective: f64,
    /// Dual objective after each pair update, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// Per-dimension z-scoring fitted on training data.
///
/// Zero-variance dimensions are only centered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Input("cannot fit a scaler on no rows".into()))?;
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: r.len(),
                });
            }
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in stds.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { v - m })
            .collect())
    }
}

/// A trained classifier. Support vectors are stored in standardized space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct SvmModel {
    support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    dual_coefs: Vec<f64>,
    bias: f64,
    gamma: f64,
    scaler: Scaler,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    gamma: f64,
    bias: f64,
    scaler_means: Vec<f64>,
    scaler_stds: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    dual_coefs: Vec<f64>,
}

impl TryFrom<ModelRepr> for SvmModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let dim = r.scaler_means.len();
        if r.scaler_stds.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: r.scaler_stds.len(),
            });
        }
        if r.support_vectors.len() != r.dual_coefs.len() {
            return Err(Error::Input(format!(
                "{} support vectors but {} dual coefficients",
                r.support_vectors.len(),
                r.dual_coefs.len()
            )));
        }
        if let Some(sv) = r.support_vectors.iter().find(|sv| sv.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: sv.len(),
            });
        }
        if !(r.gamma > 0.0 && r.gamma.is_finite()) {
            return Err(Error::Input(format!("gamma must be positive, got {}", r.gamma)));
        }
        Ok(SvmModel {
            support_vectors: r.support_vectors,
            dual_coefs: r.dual_coefs,
            bias: r.bias,
            gamma: r.gamma,
            scaler: Scaler {
                means: r.scaler_means,
                stds: r.scaler_stds,
            },
        })
    }
}

impl From<SvmModel> for ModelRepr {
    fn from(m: SvmModel) -> Self {
        ModelRepr {
            gamma: m.gamma,
            bias: m.bias,
            scaler_means: m.scaler.means,
            scaler_stds: m.scaler.stds,
            support_vectors: m.support_vectors,
            dual_coefs: m.dual_coefs,
        }
    }
}

impl SvmModel {
    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    /// `Σ coef_i K(sv_i, scale(x)) + bias`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let xs = self.scaler.transform(x)?;
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * (-self.gamma * kernel::sq_dist(sv, &xs)).exp())
            .sum::<f64>()
            + self.bias)
    }

    /// Incident iff the decision value is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Result<(bool, f64)> {
        let v = self.decision_value(x)?;
        Ok((v > 0.0, v))
    }
}

/// Standardized training data with cached pairwise distances, reusable across
/// hyperparameters.
pub struct TrainingSet {
    scaler: Scaler,
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    distances: Option<SqDistances>,
}

impl TrainingSet {
    pub fn new(features: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
            return Err(Error::Input(
                "training data must contain both incident and non-incident examples".into(),
            ));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("training features must be finite".into()));
        }
        let scaler = Scaler::fit(features)?;
        let rows = features
            .iter()
            .map(|f| scaler.transform(f))
            .collect::<Result<Vec<_>>>()?;
        let y = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let distances = (rows.len() <= DENSE_LIMIT).then(|| SqDistances::new(&rows));
        Ok(Self {
            scaler,
            rows,
            y,
            distances,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Trains one model per `c` sharing a single kernel evaluation for `gamma`.
    pub fn fit_many(
        &self,
        gamma: f64,
        cs: &[f64],
        solver: &SolverConfig,
    ) -> Result<Vec<(SvmModel, TrainStatus)>> {
        SvmHyperparams::new(1.0, gamma)?;
        let kernel = match &self.distances {
            Some(d) => KernelMatrix::from_distances(d, gamma),
            None => KernelMatrix::lazy(&self.rows, gamma),
        };
        cs.iter()
            .map(|&c| {
                SvmHyperparams::new(c, gamma)?;
                Ok(self.finish(&kernel, c, gamma, solver))
            })
            .collect()
    }

    pub fn fit(&self, hp: &SvmHyperparams, solver: &SolverConfig) -> Result<(SvmModel, TrainStatus)> {
        hp.validate()?;
        Ok(self
            .fit_many(hp.gamma, &[hp.c], solver)?
            .pop()
            .expect("one model per c"))
    }

    /// Squared distances from standardized `queries` to every training row,
    /// shared by all models fitted on this set.
    pub fn query_distances(&self, queries: &[Vec<f64>]) -> Result<QueryDistances> {
        let data = queries
            .iter()
            .map(|q| {
                let q = self.scaler.transform(q)?;
                Ok(self.rows.iter().map(|r| kernel::sq_dist(r, &q)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(QueryDistances(data))
    }

    /// Like [`TrainingSet::fit_many`] but returns the decision values of the
    /// queried points instead of the models.
    pub fn decision_values_many(
        &self,
        gamma: f64,
        cs: &[f64],
        solver: &SolverConfig,
        queries: &QueryDistances,
    ) -> Result<Vec<(TrainStatus, Vec<f64>)>> {
        SvmHyperparams::new(1.0, gamma)?;
        let kernel = match &self.distances {
            Some(d) => KernelMatrix::from_distances(d, gamma),
            None => KernelMatrix::lazy(&self.rows, gamma),
        };
        let mut out = Vec::with_capacity(cs.len());
        for &c in cs {
            SvmHyperparams::new(c, gamma)?;
            let sol = smo::solve(&kernel, &self.y, c, solver.tol, solver.max_iter, solver.trace);
            let coefs: Vec<(usize, f64)> = sol
                .alpha
                .iter()
                .zip(&self.y)
                .enumerate()
                .filter(|(_, (&a, _))| a > 0.0)
                .map(|(i, (&a, &y))| (i, a * y))
                .collect();
            let values = queries
                .0
                .iter()
                .map(|d| {
                    coefs
                        .iter()
                        .map(|&(i, coef)| coef * (-gamma * d[i]).exp())
                        .sum::<f64>()
                        + sol.bias
                })
                .collect();
            let status = TrainStatus {
                iterations: sol.iterations,
                kkt_violation: sol.kkt_violation,
                converged: sol.converged,
                dual_objective: sol.dual_objective,
                objective_trace: sol.objective_trace,
            };
            out.push((status, values));
        }
        Ok(out)
    }

    fn finish(
        &self,
        kernel: &KernelMatrix<'_>,
        c: f64,
        gamma: f64,
        solver: &SolverConfig,
    ) -> (SvmModel, TrainStatus) {
        let sol = smo::solve(kernel, &self.y, c, solver.tol, solver.max_iter, solver.trace);
        let (support_vectors, dual_coefs) = sol
            .alpha
            .iter()
            .zip(&self.rows)
            .zip(&self.y)
            .filter(|((&a, _), _)| a > 0.0)
            .map(|((&a, row), &y)| (row.clone(), a * y))
            .unzip();
        let model = SvmModel {
            support_vectors,
            dual_coefs,
            bias: sol.bias,
            gamma,
            scaler: self.scaler.clone(),
        };
        let status = TrainStatus {
            iterations: sol.iterations,
            kkt_violation: sol.kkt_violation,
            converged: sol.converged,
            dual_objective: sol.dual_objective,
            objective_trace: sol.objective_trace,
        };
        (model, status)
    }
}

/// Squared distances from query points to the rows of a [`TrainingSet`].
pub struct QueryDistances(Vec<Vec<f64>>);

/// Standardizes the features, then solves the dual with SMO.
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[bool],
    hp: &SvmHyperparams,
    solver: &SolverConfig,
) -> Result<(SvmModel, TrainStatus)> {
    hp.validate()?;
    TrainingSet::new(features, labels)?.fit(hp, solver)
}
