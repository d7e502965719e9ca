use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use incident_featlab::datamodel::{load_dataset, trim_head, write_dataset};
use incident_featlab::eval::{
    codebook_source, fit_detector, learn_codebooks, pair_grid_trend, run_experiment,
    run_pair_grid, write_report_csv, Detector, ExperimentReport, FeatureMode, RepeatSeeds,
};
use incident_featlab::{generate_dataset, Metrics, PairConfig, SynthConfig, TrimmedDataset};
use serde::Serialize;

use crate::config::{load, Loaded, RunConfig};
use crate::error::CliError;
use crate::manifest::{sidecar, Artifact, Manifest, Outputs, SeedRecord};
use crate::{RunArgs, SynthArgs};

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("serializing output: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let Loaded {
        config: mut cfg,
        manifest: _,
    } = load::<SynthConfig>(args.config.as_deref(), "synth")?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_units {
        cfg.n_units = n;
    }
    if let Some(tag) = args.site_tag {
        cfg.site_tag = tag;
    }
    cfg.validate()?;
    let ds = generate_dataset(&cfg)?;
    let mut bytes = Vec::new();
    write_dataset(&ds, &mut bytes)?;

    let seeds = SeedRecord {
        seed: cfg.seed,
        repeats: Vec::new(),
    };
    let mut outputs = Outputs::default();
    outputs.add("data", args.out.clone(), bytes);
    outputs.commit(Manifest::new("synth", cfg, seeds), &sidecar(&args.out))?;
    println!(
        "wrote {} units, {} intervals ({} incident) to {}",
        ds.units().len(),
        ds.interval_count(),
        ds.incident_count(),
        args.out.display()
    );
    Ok(())
}

/// Configuration, loaded inputs and their hashes for one pipeline command.
struct Run {
    cfg: RunConfig,
    replayed: Option<Manifest<RunConfig>>,
    inputs: BTreeMap<String, Artifact>,
}

impl Run {
    fn start(args: RunArgs, command: &str) -> Result<Self, CliError> {
        let Loaded { config, manifest } = load::<RunConfig>(args.config.as_deref(), command)?;
        let cfg = args.apply(config);
        Ok(Self {
            cfg,
            replayed: manifest,
            inputs: BTreeMap::new(),
        })
    }

    fn load(&mut self, role: &str, path: &Path, z: usize) -> Result<TrimmedDataset, CliError> {
        let ds = load_dataset(path)?;
        self.inputs.insert(role.into(), Artifact::of(path)?);
        Ok(trim_head(&ds, &incident_featlab::PreprocessConfig { z })?)
    }

    fn optional(&mut self, role: &str, path: Option<PathBuf>, z: usize) -> Result<Option<TrimmedDataset>, CliError> {
        path.map(|p| self.load(role, &p, z)).transpose()
    }

    /// Checks recorded input hashes when replaying a manifest.
    fn verify(&self) -> Result<(), CliError> {
        match &self.replayed {
            Some(m) => m.verify_inputs(&self.inputs),
            None => Ok(()),
        }
    }

    fn manifest(&self, command: &str, seeds: SeedRecord) -> Manifest<RunConfig> {
        let mut m = Manifest::new(command, self.cfg.clone(), seeds);
        m.inputs = self.inputs.clone();
        m
    }

    fn out(&self) -> Result<PathBuf, CliError> {
        RunConfig::require(&self.cfg.out, "out").map(Path::to_path_buf)
    }
}

pub fn learn(args: RunArgs) -> Result<(), CliError> {
    let mut run = Run::start(args, "learn")?;
    let cfg = run.cfg.clone();
    cfg.validate(&[])?;
    cfg.learning.validate(cfg.preprocess.z)?;
    let out = run.out()?;
    let path = cfg
        .unlabeled
        .clone()
        .or_else(|| cfg.train.clone())
        .ok_or_else(|| CliError::Validation("no unlabeled data given (--unlabeled)".into()))?;
    let source = run.load("unlabeled", &path, cfg.preprocess.z)?;
    run.verify()?;

    let seeds = RepeatSeeds::new(cfg.seed);
    let books = learn_codebooks(&source, &cfg.learning, seeds.patches, seeds.kmeans)?;
    let mut outputs = Outputs::default();
    outputs.add("codebooks", out.clone(), to_json(&books)?);
    outputs.commit(
        run.manifest("learn", SeedRecord::for_repeats(cfg.seed, 1)),
        &sidecar(&out),
    )?;
    for cb in books.iter() {
        println!("{}: K = {}, d = {}", cb.channel(), cb.k(), cb.d());
    }
    println!("wrote codebooks to {}", out.display());
    Ok(())
}

pub fn train(args: RunArgs) -> Result<(), CliError> {
    let mut run = Run::start(args, "train")?;
    let cfg = run.cfg.clone();
    cfg.validate(&[cfg.pair])?;
    let out = run.out()?;
    let z = cfg.preprocess.z;
    let train = run.load("train", RunConfig::require(&cfg.train, "train")?, z)?;
    let unlabeled = run.optional("unlabeled", cfg.unlabeled.clone(), z)?;
    codebook_source(cfg.mode, &train, unlabeled.as_ref())?;
    run.verify()?;

    let detector = fit_detector(&train, unlabeled.as_ref(), &cfg.experiment(), cfg.seed)?;
    let mut outputs = Outputs::default();
    outputs.add("model", out.clone(), to_json(&detector)?);
    outputs.commit(
        run.manifest("train", SeedRecord::for_repeats(cfg.seed, 1)),
        &sidecar(&out),
    )?;
    println!(
        "{} [{}]: {} features, c = {}, gamma = {}, CV PI = {:.6e}, converged = {}",
        detector.mode,
        detector.pair,
        detector.feature_dim(),
        detector.hyperparams.c,
        detector.hyperparams.gamma,
        detector.cv_pi,
        detector.converged
    );
    println!("wrote model to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    mode: FeatureMode,
    pair: PairConfig,
    feature_dim: usize,
    metrics: &'a [Metrics],
}

pub fn eval(args: RunArgs) -> Result<(), CliError> {
    let mut run = Run::start(args, "eval")?;
    let cfg = run.cfg.clone();
    if cfg.pt_levels.is_empty() {
        return Err(CliError::Validation("at least one persistence level is required".into()));
    }
    let out = run.out()?;
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let text = std::fs::read_to_string(model_path).map_err(|e| {
        CliError::Validation(format!("cannot read model {}: {e}", model_path.display()))
    })?;
    let detector: Detector = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("model {}: {e}", model_path.display())))?;
    run.inputs.insert("model".into(), Artifact::of(model_path)?);
    let test = run.load("test", RunConfig::require(&cfg.test, "test")?, detector.z)?;
    run.verify()?;

    let metrics = detector.evaluate(&test, &cfg.pt_levels)?;
    let result = EvalOutput {
        mode: detector.mode,
        pair: detector.pair,
        feature_dim: detector.feature_dim(),
        metrics: &metrics,
    };
    let mut outputs = Outputs::default();
    outputs.add("metrics", out.clone(), to_json(&result)?);
    outputs.commit(
        run.manifest("eval", SeedRecord { seed: cfg.seed, repeats: Vec::new() }),
        &sidecar(&out),
    )?;
    println!("pt  DR      FAR       MTTD    PI           CR");
    for m in &metrics {
        println!(
            "{:<3} {:<7.4} {:<9.6} {:<7} {:<12.6e} {:.4}",
            m.pt,
            m.dr,
            m.far,
            m.mttd.map_or("-".into(), |v| format!("{v:.3}")),
            m.pi,
            m.cr
        );
    }
    println!("wrote metrics to {}", out.display());
    Ok(())
}

/// Writes `report.csv`, `report.json` and `manifest.json` into `dir`.
fn commit_reports(
    dir: &Path,
    reports: &[ExperimentReport],
    manifest: Manifest<RunConfig>,
) -> Result<Vec<u8>, CliError> {
    let mut csv = Vec::new();
    write_report_csv(reports, &mut csv)?;
    let mut outputs = Outputs::default();
    outputs.add("report_csv", dir.join("report.csv"), csv.clone());
    outputs.add("report_json", dir.join("report.json"), to_json(&reports)?);
    outputs.commit(manifest, &dir.join("manifest.json"))?;
    Ok(csv)
}

pub fn grid(args: RunArgs) -> Result<(), CliError> {
    let mut run = Run::start(args, "grid")?;
    let cfg = run.cfg.clone();
    if cfg.pairs.is_empty() {
        return Err(CliError::Validation("no pairs given (--pairs)".into()));
    }
    cfg.validate(&cfg.pairs)?;
    let dir = run.out()?;
    let z = cfg.preprocess.z;
    let train = run.load("train", RunConfig::require(&cfg.train, "train")?, z)?;
    let test = run.load("test", RunConfig::require(&cfg.test, "test")?, z)?;
    run.verify()?;

    let reports = run_pair_grid(&train, &test, &cfg.pairs, &cfg.experiment())?;
    commit_reports(
        &dir,
        &reports,
        run.manifest("grid", SeedRecord::for_repeats(cfg.seed, cfg.repeats)),
    )?;
    for &pt in &cfg.pt_levels {
        let trend = pair_grid_trend(&reports, pt);
        println!("pt = {pt}");
        println!("  pair    FAR       MTTD");
        for (pair, far, mttd) in &trend.rows {
            println!(
                "  {:<7} {:<9.6} {}",
                format!("[{pair}]"),
                far,
                mttd.map_or("-".into(), |m| format!("{m:.3}"))
            );
        }
        println!(
            "  FAR non-increasing: {}, MTTD non-decreasing: {}",
            trend.far_non_increasing, trend.mttd_non_decreasing
        );
    }
    println!("wrote reports to {}", dir.display());
    Ok(())
}

pub fn e2e(args: RunArgs) -> Result<(), CliError> {
    let mut run = Run::start(args, "e2e")?;
    let cfg = run.cfg.clone();
    cfg.validate(&[cfg.pair])?;
    let dir = run.out()?;
    let z = cfg.preprocess.z;
    let train = run.load("train", RunConfig::require(&cfg.train, "train")?, z)?;
    let test = run.load("test", RunConfig::require(&cfg.test, "test")?, z)?;
    let unlabeled = run.optional("unlabeled", cfg.unlabeled.clone(), z)?;
    codebook_source(cfg.mode, &train, unlabeled.as_ref())?;
    run.verify()?;

    let report = run_experiment(&train, &test, unlabeled.as_ref(), &cfg.experiment())?;
    let csv = commit_reports(
        &dir,
        std::slice::from_ref(&report),
        run.manifest("e2e", SeedRecord::for_repeats(cfg.seed, cfg.repeats)),
    )?;
    print!("{}", String::from_utf8_lossy(&csv));
    println!("wrote reports to {}", dir.display());
    Ok(())
}
