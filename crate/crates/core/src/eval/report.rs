use std::io::Write;

use serde::{Deserialize, Serialize};

use super::experiment::{FeatureMode, RepeatResult};
use crate::datamodel::PairConfig;
use crate::error::Result;

pub const REPORT_CSV_HEADER: [&str; 14] = [
    "mode", "pair", "pt", "dr_mean", "dr_std", "far_mean", "far_std", "mttd_mean", "mttd_std",
    "pi_mean", "pi_std", "cr_mean", "cr_std", "feature_dim",
];

/// Mean and sample standard deviation (0 for a single value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    /// Number of values aggregated.
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            std,
            n: values.len(),
        })
    }
}

/// Per-metric statistics across repeats at one persistence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtSummary {
    pub pt: usize,
    pub dr: Stat,
    pub far: Stat,
    /// Over the repeats that detected at least one incident.
    pub mttd: Option<Stat>,
    pub pi: Stat,
    pub cr: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: FeatureMode,
    pub pair: PairConfig,
    pub feature_dim: usize,
    /// Site the codebooks were learned on, for enhanced modes.
    pub codebook_site: Option<String>,
    pub repeats: usize,
    pub pt_levels: Vec<usize>,
    pub runs: Vec<RepeatResult>,
    pub summary: Vec<PtSummary>,
}

impl ExperimentReport {
    pub(crate) fn new(
        mode: FeatureMode,
        pair: PairConfig,
        feature_dim: usize,
        codebook_site: Option<String>,
        pt_levels: Vec<usize>,
        runs: Vec<RepeatResult>,
    ) -> Self {
        let summary = pt_levels
            .iter()
            .enumerate()
            .map(|(k, &pt)| {
                let col = |f: &dyn Fn(&super::Metrics) -> f64| -> Vec<f64> {
                    runs.iter().map(|r| f(&r.metrics[k])).collect()
                };
                let mttd: Vec<f64> = runs.iter().filter_map(|r| r.metrics[k].mttd).collect();
                PtSummary {
                    pt,
                    dr: Stat::of(&col(&|m| m.dr)).expect("at least one repeat"),
                    far: Stat::of(&col(&|m| m.far)).expect("at least one repeat"),
                    mttd: Stat::of(&mttd),
                    pi: Stat::of(&col(&|m| m.pi)).expect("at least one repeat"),
                    cr: Stat::of(&col(&|m| m.cr)).expect("at least one repeat"),
                }
            })
            .collect();
        Self {
            mode,
            pair,
            feature_dim,
            codebook_site,
            repeats: runs.len(),
            pt_levels,
            runs,
            summary,
        }
    }

    pub fn summary_at(&self, pt: usize) -> Option<&PtSummary> {
        self.summary.iter().find(|s| s.pt == pt)
    }
}

/// Writes one row per (report, persistence level).
pub fn write_report_csv<W: Write>(reports: &[ExperimentReport], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(REPORT_CSV_HEADER)?;
    for report in reports {
        for s in &report.summary {
            let (mttd_mean, mttd_std) = s
                .mttd
                .map_or((String::new(), String::new()), |m| (m.mean.to_string(), m.std.to_string()));
            wtr.write_record([
                report.mode.to_string(),
                report.pair.to_string(),
                s.pt.to_string(),
                s.dr.mean.to_string(),
                s.dr.std.to_string(),
                s.far.mean.to_string(),
                s.far.std.to_string(),
                mttd_mean,
                mttd_std,
                s.pi.mean.to_string(),
                s.pi.std.to_string(),
                s.cr.mean.to_string(),
                s.cr.std.to_string(),
                report.feature_dim.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// FAR and MTTD across a pair grid at one persistence level, with the
/// direction of each trend as pairs grow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub pt: usize,
    pub rows: Vec<(PairConfig, f64, Option<f64>)>,
    pub far_non_increasing: bool,
    pub mttd_non_decreasing: bool,
}

pub fn pair_grid_trend(reports: &[ExperimentReport], pt: usize) -> TrendSummary {
    let rows: Vec<(PairConfig, f64, Option<f64>)> = reports
        .iter()
        .filter_map(|r| {
            r.summary_at(pt)
                .map(|s| (r.pair, s.far.mean, s.mttd.map(|m| m.mean)))
        })
        .collect();
    let far_non_increasing = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let mttd_non_decreasing = rows.windows(2).all(|w| match (w[0].2, w[1].2) {
        (Some(a), Some(b)) => b >= a,
        _ => false,
    });
    TrendSummary {
        pt,
        rows,
        far_non_increasing,
        mttd_non_decreasing,
    }
}
