use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, IncidentUnit, IntervalRecord};
use crate::error::{Error, Result};

/// Required header of the interval CSV format.
pub const CSV_HEADER: [&str; 7] = [
    "unit_id", "t_index", "vol_up", "occ_up", "vol_down", "occ_down", "label",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    unit_id: String,
    t_index: usize,
    vol_up: f64,
    occ_up: f64,
    vol_down: f64,
    occ_down: f64,
    label: u8,
}

/// Loads a dataset from a CSV file. The site tag is the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Open {
        path: path.to_owned(),
        source,
    })?;
    let site_tag = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, site_tag)
}

/// Parses the interval CSV format. Units keep their order of first
/// appearance; rows within a unit are sorted by `t_index`.
pub fn read_dataset<R: Read>(reader: R, site_tag: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header must be `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<IntervalRecord>> = HashMap::new();
    for result in rdr.records() {
        let raw = result.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = raw.position().map_or(0, |p| p.line());
        let row: Row = raw.deserialize(Some(&header)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let incident = match row.label {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("label must be 0 or 1, found {other}"),
                })
            }
        };
        let record = IntervalRecord {
            t_index: row.t_index,
            vol_up: row.vol_up,
            occ_up: row.occ_up,
            vol_down: row.vol_down,
            occ_down: row.occ_down,
            incident,
        };
        if let Some((field, value, expected)) = record.range_violation() {
            return Err(Error::Range {
                line,
                field,
                value,
                expected,
            });
        }
        grouped
            .entry(row.unit_id.clone())
            .or_insert_with(|| {
                order.push(row.unit_id);
                Vec::new()
            })
            .push(record);
    }

    let units = order
        .into_iter()
        .map(|id| {
            let mut records = grouped.remove(&id).unwrap_or_default();
            records.sort_by_key(|r| r.t_index);
            IncidentUnit::new(id, records)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(site_tag, units)
}

/// Writes a dataset in the interval CSV format.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for unit in ds.units() {
        for r in unit.records() {
            wtr.serialize(Row {
                unit_id: unit.unit_id().to_owned(),
                t_index: r.t_index,
                vol_up: r.vol_up,
                occ_up: r.occ_up,
                vol_down: r.vol_down,
                occ_down: r.occ_down,
                label: u8::from(r.incident),
            })?;
        }
    }
    if ds.units().is_empty() {
        wtr.write_record(CSV_HEADER)?;
    }
    wtr.flush()?;
    Ok(())
}
