//! `report.json`, `trials.csv` and Dice tables.
//!
//! `report.json` schema (version 1): `schema_version`, `command`, `config`
//! (the full [`JobConfig`]), `intensity` (pre-normalization ranges), then the
//! optional sections `solve` (every [`SolveReport`] field), `det` and `search`.
//! `trials.csv` carries one [`TrialRecord`] per row in evaluation order.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IntensityRange, JobConfig};
use crate::continuation::{SearchStatus, TrialRecord};
use crate::error::Result;
use crate::metrics::{DetStats, DiceReport, LabelSummary};
use crate::optimizer::SolveReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityRanges {
    pub template: IntensityRange,
    pub reference: IntensityRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub status: SearchStatus,
    pub alpha: Option<f64>,
    pub trials: usize,
    pub anomalies: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: JobConfig,
    pub intensity: Option<IntensityRanges>,
    pub solve: Option<SolveReport>,
    pub det: Option<DetStats>,
    pub search: Option<SearchSummary>,
}

impl RunReport {
    pub fn new(command: &str, config: &JobConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.to_string(),
            config: config.clone(),
            intensity: None,
            solve: None,
            det: None,
            search: None,
        }
    }

    /// Copy with runtimes zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        Self { solve: self.solve.as_ref().map(SolveReport::without_timing), ..self.clone() }
    }
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn write_trials_csv(path: impl AsRef<Path>, trials: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in trials {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DiceRow {
    label: i32,
    dice: f64,
    empty: bool,
}

/// One row per id, then `union` as label 0.
pub fn write_dice_csv(path: impl AsRef<Path>, report: &DiceReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in report.per_label.iter().chain(std::iter::once(&report.union)) {
        w.serialize(DiceRow { label: s.id, dice: s.score, empty: s.empty })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_label_summary_csv(path: impl AsRef<Path>, rows: &[LabelSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
