//! Run manifests and atomic output files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use incident_featlab::eval::RepeatSeeds;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "incident-featlab";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hash_file(path)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSeedRecord {
    pub repeat: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub derived: RepeatSeeds,
}

/// Seeds actually used by a run, all derived from `seed`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repeats: Vec<RepeatSeedRecord>,
}

impl SeedRecord {
    pub fn for_repeats(seed: u64, repeats: usize) -> Self {
        Self {
            seed,
            repeats: (0..repeats)
                .map(|r| {
                    let s = seed.wrapping_add(r as u64);
                    RepeatSeedRecord {
                        repeat: r,
                        seed: s,
                        derived: RepeatSeeds::new(s),
                    }
                })
                .collect(),
        }
    }
}

/// Resolved configuration, seeds and content hashes of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest<T> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: T,
    pub seeds: SeedRecord,
    pub inputs: BTreeMap<String, Artifact>,
    pub outputs: BTreeMap<String, Artifact>,
}

impl<T> Manifest<T> {
    pub fn new(command: &str, config: T, seeds: SeedRecord) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn looks_like(value: &serde_json::Value) -> bool {
        value.get("tool").and_then(|t| t.as_str()) == Some(TOOL)
            && value.get("command").is_some()
            && value.get("config").is_some()
    }

    /// Fails when an input this manifest recorded has different content now.
    pub fn verify_inputs(&self, current: &BTreeMap<String, Artifact>) -> Result<(), CliError> {
        for (role, recorded) in &self.inputs {
            if let Some(now) = current.get(role) {
                if now.sha256 != recorded.sha256 {
                    return Err(CliError::Validation(format!(
                        "input `{role}` ({}) differs from the one recorded in the manifest",
                        now.path.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Output files of one run, written together once the run has finished.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, role: &str, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((role.into(), path, bytes));
    }

    /// Writes every file and then the manifest, each atomically.
    pub fn commit<T: Serialize>(
        self,
        mut manifest: Manifest<T>,
        manifest_path: &Path,
    ) -> Result<(), CliError> {
        for (role, path, bytes) in &self.files {
            manifest.outputs.insert(
                role.clone(),
                Artifact {
                    path: path.clone(),
                    sha256: sha256_hex(bytes),
                },
            );
        }
        for (_, path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        let mut json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("serializing manifest: {e}")))?;
        json.push(b'\n');
        write_atomic(manifest_path, &json)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Runtime(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// `data.csv` → `data.csv.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
