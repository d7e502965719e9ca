use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, default_grid};
use super::report::ExperimentReport;
use super::{metrics_for_classifications, Metrics};
use crate::datamodel::{
    assemble_context_vectors, assemble_raw_features, unlabeled_corpus, Channel, LabeledExample,
    PairConfig, TrimmedDataset,
};
use crate::error::{Error, Result};
use crate::featlearn::{
    build_enhanced, learn_codebook, Codebook, CodebookSet, KMeansConfig, LearningConfig,
    PatchConfig,
};
use crate::svm::{SolverConfig, SvmHyperparams, SvmModel, TrainingSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// The `[x-y]` pair alone.
    Raw,
    /// Pair plus pooled activations from codebooks learned on the training site.
    Enhanced,
    /// Pair plus pooled activations from codebooks learned on another site.
    TransferEnhanced,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Raw => "raw",
            FeatureMode::Enhanced => "enhanced",
            FeatureMode::TransferEnhanced => "transfer-enhanced",
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureMode::Raw),
            "enhanced" => Ok(FeatureMode::Enhanced),
            "transfer-enhanced" => Ok(FeatureMode::TransferEnhanced),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected raw, enhanced or transfer-enhanced)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: FeatureMode,
    pub pair: PairConfig,
    pub repeats: usize,
    pub pt_levels: Vec<usize>,
    /// Repeat `r` runs with seed `seed + r`.
    pub seed: u64,
    pub learning: LearningConfig,
    pub grid: Vec<SvmHyperparams>,
    pub folds: usize,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: FeatureMode::Raw,
            pair: PairConfig::new(4, 2).expect("valid pair"),
            repeats: 1,
            pt_levels: vec![0, 1, 2],
            seed: 0,
            learning: LearningConfig::default(),
            grid: default_grid(),
            folds: 10,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, z: usize) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.pt_levels.is_empty() {
            return Err(Error::Config("at least one persistence level is required".into()));
        }
        if self.pair.x() > z {
            return Err(Error::Config(format!(
                "pair [{}] needs more history than z = {z}",
                self.pair
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        for hp in &self.grid {
            hp.validate()?;
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Config("solver tol and max_iter must be positive".into()));
        }
        if self.mode != FeatureMode::Raw {
            self.learning.validate(z)?;
        }
        Ok(())
    }
}

/// Outcome of one repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub best_hyperparams: SvmHyperparams,
    pub cv_pi: f64,
    pub converged: bool,
    /// One entry per persistence level, in configuration order.
    pub metrics: Vec<Metrics>,
}

/// Seeds for one repeat, drawn in a fixed order from the repeat seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatSeeds {
    pub cv: u64,
    /// Patch sampling, per channel in [`Channel::ALL`] order.
    pub patches: [u64; 4],
    pub kmeans: [u64; 4],
}

impl RepeatSeeds {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cv = rng.next_u64();
        let patches = std::array::from_fn(|_| rng.next_u64());
        let kmeans = std::array::from_fn(|_| rng.next_u64());
        Self {
            cv,
            patches,
            kmeans,
        }
    }
}

/// Learns the four per-channel codebooks from the unlabeled corpus of `source`.
pub fn learn_codebooks(
    source: &TrimmedDataset,
    learning: &LearningConfig,
    patch_seeds: [u64; 4],
    kmeans_seeds: [u64; 4],
) -> Result<CodebookSet> {
    let books = Channel::ALL
        .iter()
        .map(|&channel| {
            let cl = learning.channel(channel);
            let corpus = unlabeled_corpus(source, channel)?;
            let patch_cfg = PatchConfig {
                d: cl.d,
                n: learning.patches,
                seed: patch_seeds[channel.index()],
            };
            let kmeans_cfg = KMeansConfig {
                seed: kmeans_seeds[channel.index()],
                ..learning.kmeans.clone()
            };
            learn_codebook(channel, &corpus, &patch_cfg, cl.k, &kmeans_cfg)
        })
        .collect::<Result<Vec<Codebook>>>()?;
    CodebookSet::try_from(books)
}

/// Raw or enhanced examples for every remaining interval of `ds`.
pub fn build_examples(
    ds: &TrimmedDataset,
    pair: PairConfig,
    codebooks: Option<&CodebookSet>,
) -> Result<Vec<LabeledExample>> {
    let mut examples = assemble_raw_features(ds, pair)?;
    if let Some(books) = codebooks {
        let contexts = assemble_context_vectors(ds);
        for (ex, ctx) in examples.iter_mut().zip(&contexts) {
            debug_assert_eq!((ex.unit, ex.t_index), (ctx.unit, ctx.t_index));
            ex.features = build_enhanced(&ex.features, ctx, books)?;
        }
    }
    Ok(examples)
}

/// A fitted pipeline: optional codebooks plus the selected SVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub mode: FeatureMode,
    pub pair: PairConfig,
    /// Head-trim depth the detector expects its inputs to have.
    pub z: usize,
    pub codebooks: Option<CodebookSet>,
    pub codebook_site: Option<String>,
    pub hyperparams: SvmHyperparams,
    pub cv_pi: f64,
    pub converged: bool,
    pub model: SvmModel,
}

impl Detector {
    pub fn feature_dim(&self) -> usize {
        self.model.dim()
    }

    /// Per-interval classifications of `ds`, in dataset order.
    pub fn classify(&self, ds: &TrimmedDataset) -> Result<Vec<bool>> {
        if ds.z() != self.z {
            return Err(Error::Config(format!(
                "detector expects z = {}, data was trimmed with z = {}",
                self.z,
                ds.z()
            )));
        }
        build_examples(ds, self.pair, self.codebooks.as_ref())?
            .iter()
            .map(|e| self.model.predict(&e.features).map(|(label, _)| label))
            .collect()
    }

    /// Metrics on `ds` at each persistence level.
    pub fn evaluate(&self, ds: &TrimmedDataset, pt_levels: &[usize]) -> Result<Vec<Metrics>> {
        let classes = self.classify(ds)?;
        pt_levels
            .iter()
            .map(|&pt| metrics_for_classifications(&classes, ds.dataset(), pt))
            .collect()
    }
}

/// Picks the codebook corpus for `mode`: none for raw features, `unlabeled`
/// or else `train` for enhanced, and a foreign-site `unlabeled` for transfer.
pub fn codebook_source<'a>(
    mode: FeatureMode,
    train: &'a TrimmedDataset,
    unlabeled: Option<&'a TrimmedDataset>,
) -> Result<Option<&'a TrimmedDataset>> {
    let source = match mode {
        FeatureMode::Raw => None,
        FeatureMode::Enhanced => Some(unlabeled.unwrap_or(train)),
        FeatureMode::TransferEnhanced => {
            let src = unlabeled.ok_or_else(|| {
                Error::Config("transfer-enhanced mode needs an unlabeled source dataset".into())
            })?;
            if src.dataset().site_tag() == train.dataset().site_tag() {
                return Err(Error::Config(format!(
                    "transfer source must come from another site than `{}`",
                    train.dataset().site_tag()
                )));
            }
            Some(src)
        }
    };
    if let Some(src) = source {
        if src.z() != train.z() {
            return Err(Error::Config("unlabeled source was trimmed with a different z".into()));
        }
    }
    Ok(source)
}

/// One repeat of: codebook learning (enhanced modes), feature assembly,
/// cross-validated model selection and a final fit on all of `train`.
///
/// `seed` is the repeat seed; see [`RepeatSeeds`].
pub fn fit_detector(
    train: &TrimmedDataset,
    unlabeled: Option<&TrimmedDataset>,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Detector> {
    cfg.validate(train.z())?;
    let source = codebook_source(cfg.mode, train, unlabeled)?;
    let seeds = RepeatSeeds::new(seed);
    let codebooks = source
        .map(|src| learn_codebooks(src, &cfg.learning, seeds.patches, seeds.kmeans))
        .transpose()?;
    let train_ex = build_examples(train, cfg.pair, codebooks.as_ref())?;
    let cv = cross_validate(
        &train_ex,
        train.dataset(),
        &cfg.grid,
        cfg.folds,
        seeds.cv,
        &cfg.solver,
    )?;
    let (x, y): (Vec<Vec<f64>>, Vec<bool>) =
        train_ex.into_iter().map(|e| (e.features, e.incident)).unzip();
    let (model, status) = TrainingSet::new(&x, &y)?.fit(&cv.best_hyperparams, &cfg.solver)?;
    Ok(Detector {
        mode: cfg.mode,
        pair: cfg.pair,
        z: train.z(),
        codebooks,
        codebook_site: source.map(|s| s.dataset().site_tag().to_owned()),
        hyperparams: cv.best_hyperparams,
        cv_pi: cv.cv_pi,
        converged: status.converged,
        model,
    })
}

/// Runs `cfg.repeats` independent repeats of [`fit_detector`] followed by
/// evaluation on `test` at every persistence level.
///
/// `unlabeled` supplies the codebook corpus. It defaults to `train` for
/// [`FeatureMode::Enhanced`] and is required, from a different site, for
/// [`FeatureMode::TransferEnhanced`].
pub fn run_experiment(
    train: &TrimmedDataset,
    test: &TrimmedDataset,
    unlabeled: Option<&TrimmedDataset>,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if train.z() != test.z() {
        return Err(Error::Config(format!(
            "train and test were trimmed differently (z = {} vs {})",
            train.z(),
            test.z()
        )));
    }
    cfg.validate(train.z())?;
    let source = codebook_source(cfg.mode, train, unlabeled)?;

    let mut runs = Vec::with_capacity(cfg.repeats);
    let mut feature_dim = 0;
    for r in 0..cfg.repeats {
        let seed = cfg.seed.wrapping_add(r as u64);
        let detector = fit_detector(train, source, cfg, seed)?;
        feature_dim = detector.feature_dim();
        runs.push(RepeatResult {
            repeat: r,
            seed,
            best_hyperparams: detector.hyperparams,
            cv_pi: detector.cv_pi,
            converged: detector.converged,
            metrics: detector.evaluate(test, &cfg.pt_levels)?,
        });
    }

    Ok(ExperimentReport::new(
        cfg.mode,
        cfg.pair,
        feature_dim,
        source.map(|s| s.dataset().site_tag().to_owned()),
        cfg.pt_levels.clone(),
        runs,
    ))
}

/// Raw-feature experiments over several pairs, one report per pair.
pub fn run_pair_grid(
    train: &TrimmedDataset,
    test: &TrimmedDataset,
    pairs: &[PairConfig],
    cfg: &ExperimentConfig,
) -> Result<Vec<ExperimentReport>> {
    if pairs.is_empty() {
        return Err(Error::Config("no pairs given".into()));
    }
    pairs
        .iter()
        .map(|&pair| {
            let cfg = ExperimentConfig {
                mode: FeatureMode::Raw,
                pair,
                ..cfg.clone()
            };
            run_experiment(train, test, None, &cfg)
        })
        .collect()
}
