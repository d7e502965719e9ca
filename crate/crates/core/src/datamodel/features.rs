use serde::{Deserialize, Serialize};

use super::{Channel, Dataset, IncidentUnit, PairConfig, PreprocessConfig};
use crate::error::{Error, Result};

/// A raw `[x-y]` or enhanced feature vector.
pub type FeatureVector = Vec<f64>;

/// A dataset whose first `z` intervals per unit have been set aside as history.
///
/// [`TrimmedDataset::dataset`] holds the remaining intervals re-indexed from 0;
/// the untrimmed original is kept so features can look back up to `z`
/// intervals from any remaining one.
#[derive(Clone, Debug)]
pub struct TrimmedDataset {
    z: usize,
    original: Dataset,
    trimmed: Dataset,
}

impl TrimmedDataset {
    pub fn z(&self) -> usize {
        self.z
    }

    pub fn original(&self) -> &Dataset {
        &self.original
    }

    /// Remaining intervals, with `t_index` and onset re-indexed.
    pub fn dataset(&self) -> &Dataset {
        &self.trimmed
    }

    pub fn interval_count(&self) -> usize {
        self.trimmed.interval_count()
    }

    /// The same trim applied to a subset of units.
    pub fn subset(&self, indices: &[usize]) -> TrimmedDataset {
        TrimmedDataset {
            z: self.z,
            original: self.original.subset(indices),
            trimmed: self.trimmed.subset(indices),
        }
    }
}

/// Drops the first `z` intervals of every unit.
pub fn trim_head(ds: &Dataset, cfg: &PreprocessConfig) -> Result<TrimmedDataset> {
    let z = cfg.z;
    let units = ds
        .units()
        .iter()
        .map(|u| trim_unit(u, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrimmedDataset {
        z,
        original: ds.clone(),
        trimmed: Dataset::new(ds.site_tag(), units)?,
    })
}

fn trim_unit(unit: &IncidentUnit, z: usize) -> Result<IncidentUnit> {
    if unit.len() <= z {
        return Err(Error::Unit {
            unit: unit.unit_id().to_owned(),
            message: format!("{} intervals cannot be trimmed by z = {z}", unit.len()),
        });
    }
    let records = unit.records()[z..]
        .iter()
        .enumerate()
        .map(|(t, r)| {
            let mut r = r.clone();
            r.t_index = t;
            r
        })
        .collect();
    IncidentUnit::new(unit.unit_id(), records)
}

/// Number of raw features for a pair: `2(x+1) + 2(y+1)`.
pub fn raw_feature_dim(pair: PairConfig) -> usize {
    2 * (pair.x() + 1) + 2 * (pair.y() + 1)
}

/// One labeled detection moment.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub incident: bool,
    /// Position of the unit within the dataset.
    pub unit: usize,
    /// Index within the trimmed unit.
    pub t_index: usize,
}

/// Builds the raw `[x-y]` feature vector for every remaining interval.
///
/// Layout: `vol_up[t-x..=t], occ_up[t-x..=t], vol_down[t-y..=t], occ_down[t-y..=t]`,
/// each block oldest to newest.
pub fn assemble_raw_features(ds: &TrimmedDataset, pair: PairConfig) -> Result<Vec<LabeledExample>> {
    if pair.x() > ds.z {
        return Err(Error::Config(format!(
            "pair [{pair}] needs {} intervals of history but the data was trimmed by z = {}",
            pair.x(),
            ds.z
        )));
    }
    let dim = raw_feature_dim(pair);
    let mut out = Vec::with_capacity(ds.interval_count());
    for (u, unit) in ds.original.units().iter().enumerate() {
        let records = unit.records();
        for t in ds.z..records.len() {
            let mut features = Vec::with_capacity(dim);
            for channel in Channel::ALL {
                let lag = if channel.is_upstream() {
                    pair.x()
                } else {
                    pair.y()
                };
                features.extend(records[t - lag..=t].iter().map(|r| r.channel(channel)));
            }
            out.push(LabeledExample {
                features,
                incident: records[t].incident,
                unit: u,
                t_index: t - ds.z,
            });
        }
    }
    Ok(out)
}

/// The `z+1` most recent values of one channel at a detection moment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub channel: Channel,
    /// Oldest first: values at `t-z, ..., t`.
    pub values: Vec<f64>,
}

/// Context vectors of all four channels at one remaining interval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalContext {
    pub unit: usize,
    pub t_index: usize,
    /// Indexed by [`Channel::index`].
    pub channels: [ContextVector; 4],
}

impl IntervalContext {
    pub fn channel(&self, channel: Channel) -> &ContextVector {
        &self.channels[channel.index()]
    }
}

/// Builds the per-channel context vectors for every remaining interval, in the
/// same order as [`assemble_raw_features`].
pub fn assemble_context_vectors(ds: &TrimmedDataset) -> Vec<IntervalContext> {
    let z = ds.z;
    let mut out = Vec::with_capacity(ds.interval_count());
    for (u, unit) in ds.original.units().iter().enumerate() {
        let records = unit.records();
        for t in z..records.len() {
            let window = &records[t - z..=t];
            let channels = Channel::ALL.map(|channel| ContextVector {
                channel,
                values: window.iter().map(|r| r.channel(channel)).collect(),
            });
            out.push(IntervalContext {
                unit: u,
                t_index: t - z,
                channels,
            });
        }
    }
    out
}

/// An unlabeled run of one channel's values.
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledSeries {
    pub channel: Channel,
    pub values: Vec<f64>,
}

impl UnlabeledSeries {
    /// All stride-1 windows of length `z+1`: a series of `m+1+z` values yields
    /// `m+1` context vectors.
    pub fn context_vectors(&self, z: usize) -> Result<Vec<ContextVector>> {
        if self.values.len() < z + 1 {
            return Err(Error::Input(format!(
                "series of {} values is shorter than a context vector ({})",
                self.values.len(),
                z + 1
            )));
        }
        Ok(self
            .values
            .windows(z + 1)
            .map(|w| ContextVector {
                channel: self.channel,
                values: w.to_vec(),
            })
            .collect())
    }
}

/// The patch-sampling corpus for one channel: every unit of the dataset taken
/// as an unlabeled series, labels ignored.
pub fn unlabeled_corpus(ds: &TrimmedDataset, channel: Channel) -> Result<Vec<ContextVector>> {
    let mut out = Vec::with_capacity(ds.interval_count());
    for unit in ds.original.units() {
        let series = UnlabeledSeries {
            channel,
            values: unit.channel_values(channel).collect(),
        };
        out.extend(series.context_vectors(ds.z)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::IntervalRecord;

    /// A unit whose readings encode their own position, so index arithmetic
    /// can be checked by value.
    fn indexed_unit(id: &str, len: usize, onset: Option<usize>) -> IncidentUnit {
        let records = (0..len)
            .map(|t| IntervalRecord {
                t_index: t,
                vol_up: t as f64,
                occ_up: t as f64 / 1000.0,
                vol_down: 100.0 + t as f64,
                occ_down: 0.5 + t as f64 / 1000.0,
                incident: onset.is_some_and(|o| t >= o),
            })
            .collect();
        IncidentUnit::new(id, records).unwrap()
    }

    fn mock(units: &[(usize, Option<usize>)]) -> Dataset {
        let units = units
            .iter()
            .enumerate()
            .map(|(i, &(len, onset))| indexed_unit(&format!("u{i}"), len, onset))
            .collect();
        Dataset::new("mock", units).unwrap()
    }

    #[test]
    fn trim_short_unit_leaves_three() {
        let ds = mock(&[(15, None)]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        assert_eq!(tr.interval_count(), 3);
        let t: Vec<_> = tr.dataset().units()[0].records().iter().map(|r| r.t_index).collect();
        assert_eq!(t, [0, 1, 2]);
        assert_eq!(tr.dataset().units()[0].records()[0].vol_up, 12.0);
    }

    #[test]
    fn trim_rejects_too_short_unit() {
        let ds = mock(&[(20, None), (12, None)]);
        match trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap_err() {
            Error::Unit { unit, .. } => assert_eq!(unit, "u1"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn trim_reindexes_onset() {
        let ds = mock(&[(90, Some(60))]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        assert_eq!(tr.dataset().units()[0].onset(), Some(48));
        assert_eq!(tr.dataset().incident_count(), 30);
    }

    #[test]
    fn raw_dims() {
        let ds = mock(&[(30, Some(20))]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        for (x, y, dim) in [(4, 2, 16), (12, 12, 52), (0, 0, 4)] {
            let ex = assemble_raw_features(&tr, PairConfig::new(x, y).unwrap()).unwrap();
            assert_eq!(ex.len(), 18);
            assert!(ex.iter().all(|e| e.features.len() == dim));
        }
    }

    #[test]
    fn zero_pair_is_own_readings() {
        let ds = mock(&[(20, Some(15))]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        let ex = assemble_raw_features(&tr, PairConfig::new(0, 0).unwrap()).unwrap();
        for (e, r) in ex.iter().zip(tr.dataset().units()[0].records()) {
            assert_eq!(e.features, [r.vol_up, r.occ_up, r.vol_down, r.occ_down]);
            assert_eq!(e.incident, r.incident);
        }
    }

    #[test]
    fn four_two_layout() {
        let ds = mock(&[(20, None)]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        let ex = assemble_raw_features(&tr, PairConfig::new(4, 2).unwrap()).unwrap();
        // Trimmed position 0 is original position 12.
        let f = &ex[0].features;
        assert_eq!(&f[0..5], &[8.0, 9.0, 10.0, 11.0, 12.0]);
        assert_eq!(&f[5..10], &[0.008, 0.009, 0.01, 0.011, 0.012]);
        assert_eq!(&f[10..13], &[110.0, 111.0, 112.0]);
        assert_eq!(&f[13..16], &[0.51, 0.511, 0.512]);
    }

    #[test]
    fn pair_longer_than_trim_is_rejected() {
        let ds = mock(&[(20, None)]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 4 }).unwrap();
        assert!(assemble_raw_features(&tr, PairConfig::new(8, 8).unwrap()).is_err());
    }

    #[test]
    fn context_vector_maps_to_untrimmed_positions() {
        let ds = mock(&[(20, None), (14, None)]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        let ctx = assemble_context_vectors(&tr);
        assert_eq!(ctx.len(), 8 + 2);
        let first = &ctx[0];
        assert_eq!(first.channel(Channel::VolUp).values.len(), 13);
        let expected: Vec<f64> = (0..=12).map(|t| t as f64).collect();
        assert_eq!(first.channel(Channel::VolUp).values, expected);
        let expected: Vec<f64> = (0..=12).map(|t| 100.0 + t as f64).collect();
        assert_eq!(first.channel(Channel::VolDown).values, expected);
        assert_eq!((ctx[8].unit, ctx[8].t_index), (1, 0));
    }

    #[test]
    fn constant_series_gives_constant_vectors() {
        let series = UnlabeledSeries {
            channel: Channel::VolUp,
            values: vec![5.0; 20],
        };
        let vectors = series.context_vectors(12).unwrap();
        assert_eq!(vectors.len(), 8);
        assert!(vectors.iter().all(|v| v.values == vec![5.0; 13]));
        assert!(UnlabeledSeries {
            channel: Channel::VolUp,
            values: vec![1.0; 12]
        }
        .context_vectors(12)
        .is_err());
    }

    #[test]
    fn corpus_matches_labeled_contexts() {
        let ds = mock(&[(20, Some(15)), (16, None)]);
        let tr = trim_head(&ds, &PreprocessConfig { z: 12 }).unwrap();
        let corpus = unlabeled_corpus(&tr, Channel::OccUp).unwrap();
        let labeled: Vec<_> = assemble_context_vectors(&tr)
            .into_iter()
            .map(|c| c.channels[Channel::OccUp.index()].clone())
            .collect();
        assert_eq!(corpus, labeled);
    }
}
