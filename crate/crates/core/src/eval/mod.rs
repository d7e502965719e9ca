//! Alarm logic, detection metrics and the experiment runners.

mod cv;
mod experiment;
mod report;

use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{Error, Result};

pub use cv::{cross_validate, default_grid, CvResult, GridScore};
pub use experiment::{
    build_examples, codebook_source, fit_detector, learn_codebooks, run_experiment,
    run_pair_grid, Detector, ExperimentConfig, FeatureMode, RepeatResult, RepeatSeeds,
};
pub use report::{
    pair_grid_trend, write_report_csv, ExperimentReport, PtSummary, Stat, TrendSummary,
    REPORT_CSV_HEADER,
};

/// Post-persistence alarm state of one unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmSeries {
    pub unit_id: String,
    pub alarms: Vec<bool>,
}

/// Raises an alarm at `t` only when the classifications at `t-pt..=t` are all
/// positive. The run counter spans the whole series.
pub fn persistence_filter(classifications: &[bool], pt: usize) -> Vec<bool> {
    let mut run = 0usize;
    classifications
        .iter()
        .map(|&c| {
            run = if c { run + 1 } else { 0 };
            run > pt
        })
        .collect()
}

/// Detection performance at one persistence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pt: usize,
    /// Fraction of incidents with an alarm inside their window.
    pub dr: f64,
    /// Alarm-active non-incident intervals over all intervals.
    pub far: f64,
    /// Mean detection delay in intervals (1 = alarm at onset); absent when
    /// nothing was detected.
    pub mttd: Option<f64>,
    /// Performance index. Uses the longest incident window in place of an
    /// absent MTTD.
    pub pi: f64,
    /// Fraction of intervals whose alarm state equals the label.
    pub cr: f64,
}

/// `(1.01 − DR)(FAR + 0.001)·MTTD`.
///
/// Evaluated as `(101 − 100·DR)(1000·FAR + 1)·MTTD / 10⁵`, which is the same
/// quantity with the decimal constants held exactly.
pub fn compute_pi(dr: f64, far: f64, mttd: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&dr) || !(0.0..=1.0).contains(&far) {
        return Err(Error::Input(format!(
            "DR ({dr}) and FAR ({far}) must be fractions in [0, 1]"
        )));
    }
    if !(mttd >= 0.0 && mttd.is_finite()) {
        return Err(Error::Input(format!("MTTD must be finite and >= 0, got {mttd}")));
    }
    Ok((101.0 - 100.0 * dr) * (1000.0 * far + 1.0) * mttd / 1e5)
}

/// Scores alarm series against the labeled units they were produced for.
pub fn compute_metrics(alarms: &[AlarmSeries], units: &Dataset, pt: usize) -> Result<Metrics> {
    if alarms.len() != units.units().len() {
        return Err(Error::Input(format!(
            "{} alarm series for {} units",
            alarms.len(),
            units.units().len()
        )));
    }
    let mut total = 0usize;
    let mut false_alarms = 0usize;
    let mut agree = 0usize;
    let mut incidents = 0usize;
    let mut detected = 0usize;
    let mut delay_sum = 0usize;
    let mut longest_window = 0usize;
    for (series, unit) in alarms.iter().zip(units.units()) {
        if series.unit_id != unit.unit_id() || series.alarms.len() != unit.len() {
            return Err(Error::Unit {
                unit: unit.unit_id().to_owned(),
                message: format!(
                    "alarm series `{}` of length {} does not align with {} intervals",
                    series.unit_id,
                    series.alarms.len(),
                    unit.len()
                ),
            });
        }
        total += unit.len();
        for (&alarm, label) in series.alarms.iter().zip(unit.labels()) {
            if alarm == label {
                agree += 1;
            }
            if alarm && !label {
                false_alarms += 1;
            }
        }
        if let Some(window) = unit.incident_window() {
            incidents += 1;
            longest_window = longest_window.max(window.len());
            if let Some(first) = series.alarms[window.clone()].iter().position(|&a| a) {
                detected += 1;
                delay_sum += first + 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Input("no intervals to evaluate".into()));
    }
    if incidents == 0 {
        return Err(Error::Input("no incident windows to detect".into()));
    }
    let dr = detected as f64 / incidents as f64;
    let far = false_alarms as f64 / total as f64;
    let mttd = (detected > 0).then(|| delay_sum as f64 / detected as f64);
    let pi = compute_pi(dr, far, mttd.unwrap_or(longest_window as f64))?;
    Ok(Metrics {
        pt,
        dr,
        far,
        mttd,
        pi,
        cr: agree as f64 / total as f64,
    })
}

/// Splits per-interval classifications (in dataset order) into per-unit
/// series, applies the persistence filter and scores the result.
pub fn metrics_for_classifications(
    classifications: &[bool],
    units: &Dataset,
    pt: usize,
) -> Result<Metrics> {
    let mut offset = 0;
    let mut alarms = Vec::with_capacity(units.units().len());
    for unit in units.units() {
        let end = offset + unit.len();
        let slice = classifications.get(offset..end).ok_or_else(|| {
            Error::Input("fewer classifications than intervals".into())
        })?;
        alarms.push(AlarmSeries {
            unit_id: unit.unit_id().to_owned(),
            alarms: persistence_filter(slice, pt),
        });
        offset = end;
    }
    if offset != classifications.len() {
        return Err(Error::Input("more classifications than intervals".into()));
    }
    compute_metrics(&alarms, units, pt)
}
