//! CSV tables of a campaign.
//!
//! - `records.csv`: one [`TrialRecord`] per row.
//! - `magnitudes.csv`: `trial,cell,magnitude,on_support` for every nonzero
//!   lasso entry and every true-support cell.
//! - `roc.csv`: `threshold,pd,pfa`; `roc_trials.csv` adds a leading `trial`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{RocCurve, TrialOutcome, TrialRecord};

pub fn write_records_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRecord>, _>>()?;
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct MagnitudeRow {
    trial: usize,
    cell: usize,
    magnitude: f64,
    on_support: bool,
}

pub fn write_magnitudes_csv<W: Write>(outcomes: &[TrialOutcome], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in outcomes {
        let mut cells: BTreeMap<usize, (f64, bool)> =
            o.true_support.iter().map(|&c| (c, (0.0, true))).collect();
        for &(c, m) in &o.magnitudes {
            cells.entry(c).or_insert((0.0, false)).0 = m;
        }
        for (cell, (magnitude, on_support)) in cells {
            w.serialize(MagnitudeRow {
                trial: o.record.trial,
                cell,
                magnitude,
                on_support,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds trial outcomes from the two tables.
pub fn read_magnitudes_csv<R: Read>(
    records: Vec<TrialRecord>,
    reader: R,
) -> Result<Vec<TrialOutcome>> {
    let mut by_trial: BTreeMap<usize, TrialOutcome> = records
        .into_iter()
        .map(|record| {
            (
                record.trial,
                TrialOutcome {
                    record,
                    true_support: Vec::new(),
                    magnitudes: Vec::new(),
                },
            )
        })
        .collect();
    let mut r = csv::Reader::from_reader(reader);
    for row in r.deserialize::<MagnitudeRow>() {
        let row = row?;
        let o = by_trial.get_mut(&row.trial).ok_or_else(|| {
            Error::Format(format!("magnitude row for unknown trial {}", row.trial))
        })?;
        if row.cell >= o.record.n_cells {
            return Err(Error::Format(format!(
                "cell {} outside the {}-cell grid",
                row.cell, o.record.n_cells
            )));
        }
        if row.on_support {
            o.true_support.push(row.cell);
        }
        if row.magnitude > 0.0 {
            o.magnitudes.push((row.cell, row.magnitude));
        }
    }
    Ok(by_trial.into_values().collect())
}

#[derive(Serialize)]
struct RocRow {
    threshold: f64,
    pd: f64,
    pfa: f64,
}

pub fn write_roc_csv<W: Write>(curve: &RocCurve, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..curve.len() {
        w.serialize(RocRow {
            threshold: curve.thresholds[i],
            pd: curve.pd[i],
            pfa: curve.pfa[i],
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RocTrialRow {
    trial: usize,
    threshold: f64,
    pd: f64,
    pfa: f64,
}

pub fn write_roc_trials_csv<W: Write>(curves: &[(usize, RocCurve)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (trial, c) in curves {
        for i in 0..c.len() {
            w.serialize(RocTrialRow {
                trial: *trial,
                threshold: c.thresholds[i],
                pd: c.pd[i],
                pfa: c.pfa[i],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
