use std::path::{Path, PathBuf};

use incident_featlab::eval::{default_grid, ExperimentConfig, FeatureMode};
use incident_featlab::featlearn::LearningConfig;
use incident_featlab::svm::{SolverConfig, SvmHyperparams};
use incident_featlab::{PairConfig, PreprocessConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest::Manifest;

/// Everything a pipeline run needs. Unset fields take their defaults; CLI
/// flags override values read from the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub mode: FeatureMode,
    pub pair: PairConfig,
    /// Pairs swept by `grid`.
    pub pairs: Vec<PairConfig>,
    pub repeats: usize,
    pub pt_levels: Vec<usize>,
    /// Top-level seed; repeat `r` uses `seed + r`.
    pub seed: u64,
    pub learning: LearningConfig,
    pub grid: Vec<SvmHyperparams>,
    pub folds: usize,
    pub solver: SolverConfig,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Self {
            preprocess: PreprocessConfig::default(),
            mode: exp.mode,
            pair: exp.pair,
            pairs: ["4-2", "8-8", "12-12"]
                .iter()
                .map(|p| p.parse().expect("valid pair"))
                .collect(),
            repeats: exp.repeats,
            pt_levels: exp.pt_levels,
            seed: exp.seed,
            learning: exp.learning,
            grid: default_grid(),
            folds: exp.folds,
            solver: exp.solver,
            train: None,
            test: None,
            unlabeled: None,
            model: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            pair: self.pair,
            repeats: self.repeats,
            pt_levels: self.pt_levels.clone(),
            seed: self.seed,
            learning: self.learning.clone(),
            grid: self.grid.clone(),
            folds: self.folds,
            solver: self.solver.clone(),
        }
    }

    /// Cross-field checks, run before any data is touched.
    pub fn validate(&self, pairs: &[PairConfig]) -> Result<(), CliError> {
        let z = self.preprocess.z;
        for p in pairs {
            if p.x() > z {
                return Err(CliError::Validation(format!(
                    "pair [{p}] needs x <= z, but z = {z}"
                )));
            }
        }
        if self.folds < 2 {
            return Err(CliError::Validation(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        self.experiment().validate(z)?;
        Ok(())
    }

    pub fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::Validation(format!("no {what} given (flag --{what} or config field `{what}`)")))
    }
}

/// A loaded configuration, remembering whether it came from a manifest.
pub struct Loaded<T> {
    pub config: T,
    pub manifest: Option<Manifest<T>>,
}

/// Reads `path` as either a plain config or a manifest written by `command`.
/// Without a path the defaults are used.
pub fn load<T>(path: Option<&Path>, command: &str) -> Result<Loaded<T>, CliError>
where
    T: DeserializeOwned + Serialize + Default + Clone,
{
    let Some(path) = path else {
        return Ok(Loaded {
            config: T::default(),
            manifest: None,
        });
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read config {}: {e}", path.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    if Manifest::<T>::looks_like(&value) {
        let manifest: Manifest<T> = serde_json::from_value(value)
            .map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))?;
        if manifest.command != command {
            return Err(CliError::Validation(format!(
                "manifest {} was written by `{}`, not `{command}`",
                path.display(),
                manifest.command
            )));
        }
        return Ok(Loaded {
            config: manifest.config.clone(),
            manifest: Some(manifest),
        });
    }
    let config = serde_json::from_value(value)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
    Ok(Loaded {
        config,
        manifest: None,
    })
}
