//! Incident datasets: loop-detector readings grouped into incident units.
//!
//! Each unit is a contiguous block of 30-second intervals carrying volume and
//! occupancy for one upstream and one downstream detector, with at most one
//! contiguous run of incident-labeled intervals.

mod csv_io;
mod features;

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_dataset, read_dataset, write_dataset, CSV_HEADER};
pub use features::{
    assemble_context_vectors, assemble_raw_features, raw_feature_dim, trim_head,
    unlabeled_corpus, ContextVector, FeatureVector, IntervalContext, LabeledExample,
    TrimmedDataset, UnlabeledSeries,
};

/// One of the four detector channels.
///
/// The declaration order is the canonical block order used by raw and
/// enhanced feature vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    VolUp,
    OccUp,
    VolDown,
    OccDown,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::VolUp,
        Channel::OccUp,
        Channel::VolDown,
        Channel::OccDown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::VolUp => "vol_up",
            Channel::OccUp => "occ_up",
            Channel::VolDown => "vol_down",
            Channel::OccDown => "occ_down",
        }
    }

    pub fn is_volume(self) -> bool {
        matches!(self, Channel::VolUp | Channel::VolDown)
    }

    pub fn is_upstream(self) -> bool {
        matches!(self, Channel::VolUp | Channel::OccUp)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown channel `{s}`")))
    }
}

/// Readings of one 30-second interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub t_index: usize,
    /// Vehicles per interval.
    pub vol_up: f64,
    /// Occupancy as a fraction in `[0, 1]`.
    pub occ_up: f64,
    pub vol_down: f64,
    pub occ_down: f64,
    pub incident: bool,
}

impl IntervalRecord {
    pub fn channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::VolUp => self.vol_up,
            Channel::OccUp => self.occ_up,
            Channel::VolDown => self.vol_down,
            Channel::OccDown => self.occ_down,
        }
    }

    /// Checks the value ranges, returning the first offending field.
    pub(crate) fn range_violation(&self) -> Option<(&'static str, f64, &'static str)> {
        for (name, v) in [("vol_up", self.vol_up), ("vol_down", self.vol_down)] {
            if !(v.is_finite() && v >= 0.0) {
                return Some((name, v, "finite and >= 0"));
            }
        }
        for (name, v) in [("occ_up", self.occ_up), ("occ_down", self.occ_down)] {
            if !(0.0..=1.0).contains(&v) {
                return Some((name, v, "fraction in [0, 1]"));
            }
        }
        None
    }
}

/// A contiguous block of intervals around (at most) one incident.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidentUnit {
    unit_id: String,
    records: Vec<IntervalRecord>,
    onset: Option<usize>,
}

impl IncidentUnit {
    /// Builds a unit, validating index contiguity, value ranges and that the
    /// incident labels form a single contiguous run.
    pub fn new(unit_id: impl Into<String>, records: Vec<IntervalRecord>) -> Result<Self> {
        let unit_id = unit_id.into();
        let fail = |message: String| Error::Unit {
            unit: unit_id.clone(),
            message,
        };
        if records.is_empty() {
            return Err(fail("unit has no intervals".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.t_index != i {
                return Err(fail(format!(
                    "t_index must be contiguous from 0; found {} at position {i}",
                    r.t_index
                )));
            }
            if let Some((field, value, expected)) = r.range_violation() {
                return Err(fail(format!(
                    "t_index {i}: {field} = {value} is out of range ({expected})"
                )));
            }
        }
        let onset = records.iter().position(|r| r.incident);
        if let Some(start) = onset {
            let end = start + records[start..].iter().take_while(|r| r.incident).count();
            if records[end..].iter().any(|r| r.incident) {
                return Err(fail(
                    "incident labels do not form a single contiguous run".into(),
                ));
            }
        }
        Ok(Self {
            unit_id,
            records,
            onset,
        })
    }

    pub fn unit_id(&self) -> &str {
        &self.unit_id
    }

    pub fn records(&self) -> &[IntervalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of the first incident-labeled interval.
    pub fn onset(&self) -> Option<usize> {
        self.onset
    }

    /// The half-open range of incident-labeled intervals.
    pub fn incident_window(&self) -> Option<Range<usize>> {
        self.onset.map(|start| {
            let len = self.records[start..]
                .iter()
                .take_while(|r| r.incident)
                .count();
            start..start + len
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = bool> + '_ {
        self.records.iter().map(|r| r.incident)
    }

    pub fn channel_values(&self, channel: Channel) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(move |r| r.channel(channel))
    }
}

/// A collection of incident units from one site.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    site_tag: String,
    units: Vec<IncidentUnit>,
}

impl Dataset {
    pub fn new(site_tag: impl Into<String>, units: Vec<IncidentUnit>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(units.len());
        for u in &units {
            if !seen.insert(u.unit_id()) {
                return Err(Error::Unit {
                    unit: u.unit_id().to_owned(),
                    message: "duplicate unit_id".into(),
                });
            }
        }
        Ok(Self {
            site_tag: site_tag.into(),
            units,
        })
    }

    pub fn site_tag(&self) -> &str {
        &self.site_tag
    }

    pub fn units(&self) -> &[IncidentUnit] {
        &self.units
    }

    pub fn interval_count(&self) -> usize {
        self.units.iter().map(IncidentUnit::len).sum()
    }

    pub fn incident_count(&self) -> usize {
        self.units
            .iter()
            .map(|u| u.labels().filter(|&l| l).count())
            .sum()
    }

    /// A new dataset holding the units at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            site_tag: self.site_tag.clone(),
            units: indices.iter().map(|&i| self.units[i].clone()).collect(),
        }
    }
}

/// Raw-feature history: `x` extra past upstream intervals and `y` extra past
/// downstream intervals, written `[x-y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PairConfig {
    x: usize,
    y: usize,
}

impl PairConfig {
    pub fn new(x: usize, y: usize) -> Result<Self> {
        if y > x {
            return Err(Error::Config(format!(
                "pair [{x}-{y}]: upstream history must be at least the downstream history"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn x(self) -> usize {
        self.x
    }

    pub fn y(self) -> usize {
        self.y
    }
}

impl fmt::Display for PairConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.x, self.y)
    }
}

impl FromStr for PairConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (x, y) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("pair `{s}` is not of the form x-y")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("pair `{s}`: `{v}` is not a count")))
        };
        PairConfig::new(parse(x)?, parse(y)?)
    }
}

impl TryFrom<String> for PairConfig {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PairConfig> for String {
    fn from(p: PairConfig) -> String {
        p.to_string()
    }
}

/// Head-trim depth: the first `z` intervals of each unit serve only as history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub z: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { z: 12 }
    }
}
