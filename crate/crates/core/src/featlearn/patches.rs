use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::ContextVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    /// Patch width.
    pub d: usize,
    /// Number of patches to draw.
    pub n: usize,
    pub seed: u64,
}

/// A contiguous sub-window of a context vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch(pub Vec<f64>);

impl Patch {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for Patch {
    fn from(v: Vec<f64>) -> Self {
        Patch(v)
    }
}

/// Draws `cfg.n` patches, each a width-`cfg.d` window at a uniformly random
/// (vector, offset) pair, with replacement.
pub fn sample_patches(vectors: &[ContextVector], cfg: &PatchConfig) -> Result<Vec<Patch>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Input("cannot sample patches from no vectors".into()))?;
    let len = first.values.len();
    if let Some(v) = vectors.iter().find(|v| v.channel != first.channel) {
        return Err(Error::Channel {
            expected: first.channel,
            actual: v.channel,
        });
    }
    if let Some(v) = vectors.iter().find(|v| v.values.len() != len) {
        return Err(Error::Dimension {
            expected: len,
            actual: v.values.len(),
        });
    }
    if cfg.d == 0 || cfg.d > len {
        return Err(Error::Config(format!(
            "patch width {} must be in 1..={len}",
            cfg.d
        )));
    }
    let offsets = len - cfg.d + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n)
        .map(|_| {
            let v = &vectors[rng.random_range(0..vectors.len())];
            let s = rng.random_range(0..offsets);
            Patch(v.values[s..s + cfg.d].to_vec())
        })
        .collect())
}
