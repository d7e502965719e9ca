//! Single-layer unsupervised feature learning.
//!
//! Per channel: sample random sub-patches of context vectors, cluster them
//! with k-means into a codebook, then map every stride-1 sub-patch of a
//! context vector through the triangle activation and sum the results.

mod encode;
mod kmeans;
mod patches;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Channel, ContextVector, FeatureVector, IntervalContext};
use crate::error::{Error, Result};

pub use encode::{encode_triangle, pool_features, ActivationVector};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansFit};
pub use patches::{sample_patches, Patch, PatchConfig};

/// K learned centroids of dimension d for one channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodebookRepr", into = "CodebookRepr")]
pub struct Codebook {
    channel: Channel,
    d: usize,
    centroids: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CodebookRepr {
    channel: Channel,
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    centroids: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(channel: Channel, centroids: Vec<Vec<f64>>) -> Result<Self> {
        let d = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Input("codebook needs at least one centroid".into()))?;
        if d == 0 {
            return Err(Error::Input("centroid dimension must be positive".into()));
        }
        for c in &centroids {
            if c.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("codebook centroids must be finite".into()));
            }
        }
        Ok(Self {
            channel,
            d,
            centroids,
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }
}

impl TryFrom<CodebookRepr> for Codebook {
    type Error = Error;

    fn try_from(r: CodebookRepr) -> Result<Self> {
        let cb = Codebook::new(r.channel, r.centroids)?;
        if cb.k() != r.k || cb.d() != r.d {
            return Err(Error::Input(format!(
                "codebook header says K={} d={}, centroids are {}x{}",
                r.k,
                r.d,
                cb.k(),
                cb.d()
            )));
        }
        Ok(cb)
    }
}

impl From<Codebook> for CodebookRepr {
    fn from(cb: Codebook) -> Self {
        CodebookRepr {
            channel: cb.channel,
            k: cb.k(),
            d: cb.d,
            centroids: cb.centroids,
        }
    }
}

/// Settings for learning one channel's codebook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelLearning {
    pub k: usize,
    pub d: usize,
}

/// Codebook sizes and patch widths for all four channels plus the shared
/// sampling and clustering settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub vol_up: ChannelLearning,
    pub occ_up: ChannelLearning,
    pub vol_down: ChannelLearning,
    pub occ_down: ChannelLearning,
    /// Patches sampled per channel.
    pub patches: usize,
    pub kmeans: KMeansConfig,
}

impl Default for LearningConfig {
    /// 75 centroids of width 11 for volume, 15 of width 6 for occupancy,
    /// 20000 patches per channel.
    fn default() -> Self {
        let vol = ChannelLearning { k: 75, d: 11 };
        let occ = ChannelLearning { k: 15, d: 6 };
        Self {
            vol_up: vol.clone(),
            occ_up: occ.clone(),
            vol_down: vol,
            occ_down: occ,
            patches: 20_000,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl LearningConfig {
    pub fn channel(&self, channel: Channel) -> &ChannelLearning {
        match channel {
            Channel::VolUp => &self.vol_up,
            Channel::OccUp => &self.occ_up,
            Channel::VolDown => &self.vol_down,
            Channel::OccDown => &self.occ_down,
        }
    }

    /// Total pooled feature count, ΣK.
    pub fn pooled_dim(&self) -> usize {
        Channel::ALL.iter().map(|&c| self.channel(c).k).sum()
    }

    pub fn validate(&self, z: usize) -> Result<()> {
        self.kmeans.validate()?;
        for c in Channel::ALL {
            let cl = self.channel(c);
            if cl.d == 0 || cl.d > z + 1 {
                return Err(Error::Config(format!(
                    "{c}: patch width d = {} must be in 1..={}",
                    cl.d,
                    z + 1
                )));
            }
            if cl.k == 0 || self.patches < cl.k {
                return Err(Error::Config(format!(
                    "{c}: need 1 <= K ({}) <= patches ({})",
                    cl.k, self.patches
                )));
            }
        }
        Ok(())
    }
}

/// One codebook per channel, in [`Channel::ALL`] order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Codebook>", into = "Vec<Codebook>")]
pub struct CodebookSet([Codebook; 4]);

impl CodebookSet {
    pub fn new(codebooks: [Codebook; 4]) -> Result<Self> {
        for (cb, expected) in codebooks.iter().zip(Channel::ALL) {
            if cb.channel() != expected {
                return Err(Error::Channel {
                    expected,
                    actual: cb.channel(),
                });
            }
        }
        Ok(Self(codebooks))
    }

    pub fn get(&self, channel: Channel) -> &Codebook {
        &self.0[channel.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Codebook> {
        self.0.iter()
    }

    pub fn pooled_dim(&self) -> usize {
        self.0.iter().map(Codebook::k).sum()
    }
}

impl TryFrom<Vec<Codebook>> for CodebookSet {
    type Error = Error;

    fn try_from(v: Vec<Codebook>) -> Result<Self> {
        let arr: [Codebook; 4] = v
            .try_into()
            .map_err(|v: Vec<_>| Error::Input(format!("expected 4 codebooks, found {}", v.len())))?;
        CodebookSet::new(arr)
    }
}

impl From<CodebookSet> for Vec<Codebook> {
    fn from(s: CodebookSet) -> Self {
        s.0.into()
    }
}

/// Samples patches from `corpus` and clusters them into a codebook.
pub fn learn_codebook(
    channel: Channel,
    corpus: &[ContextVector],
    patch_cfg: &PatchConfig,
    k: usize,
    kmeans_cfg: &KMeansConfig,
) -> Result<Codebook> {
    if let Some(v) = corpus.iter().find(|v| v.channel != channel) {
        return Err(Error::Channel {
            expected: channel,
            actual: v.channel,
        });
    }
    let patches = sample_patches(corpus, patch_cfg)?;
    let fit = kmeans_fit(&patches, k, kmeans_cfg)?;
    Codebook::new(channel, fit.centroids)
}

/// Concatenates the raw features with the pooled activations of every channel,
/// in [`Channel::ALL`] order.
pub fn build_enhanced(
    raw: &[f64],
    context: &IntervalContext,
    codebooks: &CodebookSet,
) -> Result<FeatureVector> {
    let mut out = Vec::with_capacity(raw.len() + codebooks.pooled_dim());
    out.extend_from_slice(raw);
    for (cb, ctx) in codebooks.iter().zip(&context.channels) {
        out.extend(pool_features(cb, ctx)?);
    }
    Ok(out)
}
