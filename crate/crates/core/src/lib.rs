//! Freeway incident detection with unsupervised feature learning.
//!
//! The pipeline turns loop-detector readings into per-interval feature
//! vectors, optionally enhanced with pooled triangle activations against
//! k-means codebooks, classifies them with an RBF SVM chosen by
//! unit-grouped cross-validation, and scores the resulting alarms.
//!
//! Modules:
//! - [`datamodel`]: datasets, CSV I/O, head trimming, raw and context features
//! - [`featlearn`]: patch sampling, k-means codebooks, triangle encoding, pooling
//! - [`svm`]: RBF C-SVM trained with SMO
//! - [`eval`]: persistence filter, DR/FAR/MTTD/PI/CR, cross-validation, experiments
//! - [`synth`]: synthetic incident datasets

pub mod datamodel;
pub mod error;
pub mod eval;
pub mod featlearn;
pub mod svm;
pub mod synth;

pub use datamodel::{
    Channel, ContextVector, Dataset, FeatureVector, IncidentUnit, IntervalRecord, LabeledExample,
    PairConfig, PreprocessConfig, TrimmedDataset,
};
pub use error::{Error, Result};
pub use eval::{Detector, ExperimentConfig, ExperimentReport, FeatureMode, Metrics};
pub use featlearn::{Codebook, CodebookSet, KMeansConfig, LearningConfig, PatchConfig};
pub use svm::{SolverConfig, SvmHyperparams, SvmModel, TrainStatus};
pub use synth::{generate_dataset, SynthConfig};
