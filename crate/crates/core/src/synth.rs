//! Phenomenological generator of labeled incident units.
//!
//! Each unit carries a slowly drifting baseline for the four channels with
//! multiplicative Gaussian noise. Inside the incident window the upstream
//! occupancy is lifted and the downstream volume dropped, both ramping in
//! linearly. It makes the detection problem learnable; it does not model
//! traffic flow.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, IncidentUnit, IntervalRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub site_tag: String,
    pub n_units: usize,
    /// Intervals before onset.
    pub pre_len: usize,
    /// Incident-labeled intervals.
    pub inc_len: usize,
    /// Post-clearance intervals are drawn uniformly from this inclusive range.
    pub post_len_min: usize,
    pub post_len_max: usize,
    /// Site mean volume, vehicles per interval.
    pub base_vol: f64,
    /// Site mean occupancy fraction.
    pub base_occ: f64,
    /// Relative standard deviation of the per-interval noise.
    pub noise_sd: f64,
    /// Relative amplitude of the slow sinusoidal drift.
    pub drift_amp: f64,
    /// Log-scale standard deviation of the per-unit level.
    pub unit_level_sd: f64,
    /// Upstream occupancy multiplier at full incident effect.
    pub inc_occ_lift: f64,
    /// Downstream volume multiplier at full incident effect.
    pub inc_vol_drop: f64,
    pub ramp_len: usize,
    /// Head-trim depth the data is meant for; onset must lie beyond it.
    pub z: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            site_tag: "site_a".into(),
            n_units: 52,
            pre_len: 60,
            inc_len: 30,
            post_len_min: 0,
            post_len_max: 5,
            base_vol: 12.0,
            base_occ: 0.12,
            noise_sd: 0.1,
            drift_amp: 0.15,
            unit_level_sd: 0.1,
            inc_occ_lift: 2.0,
            inc_vol_drop: 0.6,
            ramp_len: 3,
            z: 12,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_units == 0 {
            return fail("n_units must be at least 1".into());
        }
        if self.pre_len < self.z + 1 {
            return fail(format!(
                "pre_len ({}) must be at least z + 1 ({})",
                self.pre_len,
                self.z + 1
            ));
        }
        if self.inc_len == 0 {
            return fail("inc_len must be at least 1".into());
        }
        if self.post_len_min > self.post_len_max {
            return fail("post_len_min exceeds post_len_max".into());
        }
        for (name, v) in [
            ("base_vol", self.base_vol),
            ("base_occ", self.base_occ),
            ("inc_occ_lift", self.inc_occ_lift),
            ("inc_vol_drop", self.inc_vol_drop),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.base_occ > 1.0 {
            return fail(format!("base_occ must be a fraction, got {}", self.base_occ));
        }
        for (name, v) in [
            ("noise_sd", self.noise_sd),
            ("drift_amp", self.drift_amp),
            ("unit_level_sd", self.unit_level_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.drift_amp >= 1.0 {
            return fail("drift_amp must be below 1".into());
        }
        Ok(())
    }
}

/// Generates `cfg.n_units` units. Unit `i` draws from its own RNG stream, so
/// the first units do not depend on `n_units`.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let units = (0..cfg.n_units)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            generate_unit(cfg, i, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(cfg.site_tag.clone(), units)
}

fn generate_unit(cfg: &SynthConfig, index: usize, rng: &mut ChaCha8Rng) -> Result<IncidentUnit> {
    let post_len = rng.random_range(cfg.post_len_min..=cfg.post_len_max);
    let len = cfg.pre_len + cfg.inc_len + post_len;
    let onset = cfg.pre_len;
    let level = (cfg.unit_level_sd * rng.sample::<f64, _>(StandardNormal)).exp();
    let period = rng.random_range(60.0..180.0);
    let phase = rng.random_range(0.0..TAU);

    let mut noise = || 1.0 + cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
    let records = (0..len)
        .map(|t| {
            let drift = 1.0 + cfg.drift_amp * (TAU * t as f64 / period + phase).sin();
            let base_vol = cfg.base_vol * level * drift;
            let base_occ = cfg.base_occ * level * drift;
            let incident = (onset..onset + cfg.inc_len).contains(&t);
            let effect = if !incident {
                0.0
            } else if cfg.ramp_len == 0 {
                1.0
            } else {
                ((t - onset + 1) as f64 / cfg.ramp_len as f64).min(1.0)
            };
            let occ_lift = 1.0 + (cfg.inc_occ_lift - 1.0) * effect;
            let vol_drop = 1.0 + (cfg.inc_vol_drop - 1.0) * effect;
            IntervalRecord {
                t_index: t,
                vol_up: (base_vol * noise()).max(0.0),
                occ_up: (base_occ * occ_lift * noise()).clamp(0.0, 1.0),
                vol_down: (base_vol * vol_drop * noise()).max(0.0),
                occ_down: (base_occ * noise()).clamp(0.0, 1.0),
                incident,
            }
        })
        .collect();
    IncidentUnit::new(format!("{}-{index:04}", cfg.site_tag), records)
}
