use super::Codebook;
use crate::datamodel::ContextVector;
use crate::error::{Error, Result};

/// Non-negative, sparse activations of one patch against a codebook.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationVector(pub Vec<f64>);

impl ActivationVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Triangle activation: `f_k = max(0, mean(dist) - dist_k)` where `dist_k` is
/// the Euclidean distance from the patch to centroid k.
pub fn encode_triangle(cb: &Codebook, patch: &[f64]) -> Result<ActivationVector> {
    let mut out = vec![0.0; cb.k()];
    encode_into(cb, patch, &mut out)?;
    Ok(ActivationVector(out))
}

/// Writes the activations into `out`, which must hold `cb.k()` entries.
fn encode_into(cb: &Codebook, patch: &[f64], out: &mut [f64]) -> Result<()> {
    if patch.len() != cb.d() {
        return Err(Error::Dimension {
            expected: cb.d(),
            actual: patch.len(),
        });
    }
    for (o, c) in out.iter_mut().zip(cb.centroids()) {
        *o = c
            .iter()
            .zip(patch)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    for o in out.iter_mut() {
        *o = (mean - *o).max(0.0);
    }
    Ok(())
}

/// Sum of the activations of every stride-1 sub-patch of `ctx`.
pub fn pool_features(cb: &Codebook, ctx: &ContextVector) -> Result<Vec<f64>> {
    if ctx.channel != cb.channel() {
        return Err(Error::Channel {
            expected: cb.channel(),
            actual: ctx.channel,
        });
    }
    if cb.d() > ctx.values.len() {
        return Err(Error::Dimension {
            expected: cb.d(),
            actual: ctx.values.len(),
        });
    }
    let mut pooled = vec![0.0; cb.k()];
    let mut scratch = vec![0.0; cb.k()];
    for window in ctx.values.windows(cb.d()) {
        encode_into(cb, window, &mut scratch)?;
        for (p, s) in pooled.iter_mut().zip(&scratch) {
            *p += s;
        }
    }
    Ok(pooled)
}
