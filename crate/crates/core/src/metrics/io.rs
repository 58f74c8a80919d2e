//! Trial-record input and per-row metrics output.

use std::cmp::Ordering;
use std::path::Path;

use super::{PowerClass, TrialMetrics, TrialRecord};
use crate::table::{fmt_num, fmt_opt, write_atomic, CsvTable, CsvText, IngestError};
use crate::timeseries::Muscle;

pub const TRIAL_HEADER: [&str; 4] = ["block", "trial", "d_req_m", "d_moved_m"];
pub const TRIAL_WINDOW_COLUMNS: [&str; 2] = ["t_start_s", "t_end_s"];
pub const METRICS_HEADER: [&str; 10] = [
    "participant",
    "condition",
    "block",
    "trial",
    "muscle",
    "rp",
    "mpo",
    "ump",
    "power_class",
    "spikiness",
];

/// Reads trial records; the window columns may be omitted as a pair.
pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>, IngestError> {
    let table = CsvTable::read(path)?;
    let optional = table.expect_header(&TRIAL_HEADER, &TRIAL_WINDOW_COLUMNS)?;
    if optional == 1 {
        return Err(IngestError::malformed(path, 1, "t_start_s requires t_end_s"));
    }
    let mut out = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let row = i + 2;
        let trial_index = table
            .str_at(i, 1)?
            .parse::<u32>()
            .map_err(|_| IngestError::malformed(path, row, "trial must be a positive integer"))?;
        let d_req = table.f64_at(i, 2)?;
        if d_req <= 0.0 {
            return Err(IngestError::malformed(path, row, "d_req_m must be positive"));
        }
        let d_moved = table.f64_at(i, 3)?;
        if d_moved < 0.0 {
            return Err(IngestError::malformed(path, row, "d_moved_m must be non-negative"));
        }
        let window = if optional == 2 {
            let (s, e) = (table.f64_at(i, 4)?, table.f64_at(i, 5)?);
            if e <= s {
                return Err(IngestError::malformed(path, row, "t_end_s must exceed t_start_s"));
            }
            Some((s, e))
        } else {
            None
        };
        out.push(TrialRecord {
            block_id: table.str_at(i, 0)?.to_string(),
            trial_index,
            d_req,
            d_moved,
            window,
        });
    }
    Ok(out)
}

pub fn write_trials_csv(path: &Path, trials: &[TrialRecord]) -> Result<(), IngestError> {
    let with_windows = trials.iter().all(|t| t.window.is_some()) && !trials.is_empty();
    let mut cols = TRIAL_HEADER.to_vec();
    if with_windows {
        cols.extend_from_slice(&TRIAL_WINDOW_COLUMNS);
    }
    let mut out = CsvText::with_header(&cols);
    for t in trials {
        let mut cells = vec![t.block_id.clone(), t.trial_index.to_string(), format!("{}", t.d_req), format!("{}", t.d_moved)];
        if let (true, Some((s, e))) = (with_windows, t.window) {
            cells.push(format!("{s}"));
            cells.push(format!("{e}"));
        }
        out.row(cells);
    }
    write_atomic(path, &out.into_string())
}

/// One output row, keyed by participant, condition, 1-based block position,
/// trial (or window) index and muscle.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub participant: String,
    pub condition: String,
    pub block: usize,
    pub trial: u32,
    pub muscle: Muscle,
    pub metrics: TrialMetrics,
}

impl MetricsRow {
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        (&self.participant, &self.condition, self.block, self.trial, &self.muscle).cmp(&(
            &other.participant,
            &other.condition,
            other.block,
            other.trial,
            &other.muscle,
        ))
    }
}

/// Renders rows in the order given. `ump_scale` multiplies the displayed
/// UMP only.
pub fn metrics_csv_text(rows: &[MetricsRow], ump_scale: f64) -> String {
    let mut out = CsvText::with_header(&METRICS_HEADER);
    for r in rows {
        let m = &r.metrics;
        out.row([
            r.participant.clone(),
            r.condition.clone(),
            r.block.to_string(),
            r.trial.to_string(),
            r.muscle.to_string(),
            fmt_num(m.rp),
            fmt_opt(m.mpo),
            fmt_opt(m.ump.map(|u| u * ump_scale)),
            m.power_class.map(|c| c.as_str().to_string()).unwrap_or_default(),
            fmt_opt(m.spikiness_z),
        ]);
    }
    out.into_string()
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow], ump_scale: f64) -> Result<(), IngestError> {
    write_atomic(path, &metrics_csv_text(rows, ump_scale))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&METRICS_HEADER, &[])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let row = i + 2;
        let int = |col: usize, what: &str| -> Result<u64, IngestError> {
            table.str_at(i, col)?.parse::<u64>().map_err(|_| IngestError::malformed(path, row, format!("{what} must be an integer")))
        };
        let class = match table.str_at(i, 8)? {
            "" => None,
            s => Some(s.parse::<PowerClass>().map_err(|e| IngestError::malformed(path, row, e))?),
        };
        out.push(MetricsRow {
            participant: table.str_at(i, 0)?.to_string(),
            condition: table.str_at(i, 1)?.to_string(),
            block: int(2, "block")? as usize,
            trial: int(3, "trial")? as u32,
            muscle: table.str_at(i, 4)?.parse().expect("infallible"),
            metrics: TrialMetrics {
                rp: table.f64_at(i, 5)?,
                mpo: table.opt_f64_at(i, 6)?,
                ump: table.opt_f64_at(i, 7)?,
                power_class: class,
                spikiness_z: table.opt_f64_at(i, 9)?,
            },
        });
    }
    Ok(out)
}
