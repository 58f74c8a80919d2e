//! Work-loop traces: one muscle's conditioned signal plotted against the
//! other's. Summarised by quadrant occupancy, directional skew of the point
//! cloud, correlations of those skews across blocks, and the L1 shift of
//! quadrant occupancy between two blocks.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use thiserror::Error;

use crate::stats::{pearson_r, CorrelationResult, StatsError};
use crate::table::{fmt_opt, write_atomic, CsvTable, CsvText, IngestError};
use crate::timeseries::EmgTrace;

pub const LOOP_TABLE_HEADER: [&str; 9] = ["condition", "block", "frac_np", "frac_pp", "frac_pn", "frac_nn", "h_s", "v_s", "d_s"];
pub const POINTS_HEADER: [&str; 2] = ["x_volts", "y_volts"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("channel rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("channel start times differ by more than one sample: {0} s vs {1} s")]
    OffsetMismatch(f64, f64),
    #[error("channel lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("loop trace is empty")]
    Empty,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("{0} projection has zero variance")]
    DegenerateDistribution(&'static str),
    #[error("need at least 3 blocks, got {0}")]
    TooFewBlocks(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Index-aligned pairs: `x` from the triceps channel, `y` from the flexor.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rate: f64,
    pub block_id: String,
}

impl LoopTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Concatenation of the given index ranges, in order.
    pub fn select(&self, ranges: &[(usize, usize)]) -> LoopTrace {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &(s, e) in ranges {
            x.extend_from_slice(&self.x[s..e]);
            y.extend_from_slice(&self.y[s..e]);
        }
        LoopTrace {
            x,
            y,
            rate: self.rate,
            block_id: self.block_id.clone(),
        }
    }

    /// Appends another trace's points.
    pub fn extend(&mut self, other: &LoopTrace) {
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
    }

    pub fn swapped(&self) -> LoopTrace {
        LoopTrace {
            x: self.y.clone(),
            y: self.x.clone(),
            rate: self.rate,
            block_id: self.block_id.clone(),
        }
    }
}

pub fn build_loop_trace(tb: &EmgTrace, fcr: &EmgTrace, block_id: impl Into<String>) -> Result<LoopTrace, LoopError> {
    if (tb.rate - fcr.rate).abs() > 1e-9 * tb.rate.max(fcr.rate) {
        return Err(LoopError::RateMismatch(tb.rate, fcr.rate));
    }
    if (tb.t0 - fcr.t0).abs() > 1.0 / tb.rate {
        return Err(LoopError::OffsetMismatch(tb.t0, fcr.t0));
    }
    if tb.len() != fcr.len() {
        return Err(LoopError::LengthMismatch(tb.len(), fcr.len()));
    }
    if tb.is_empty() {
        return Err(LoopError::Empty);
    }
    Ok(LoopTrace {
        x: tb.samples.clone(),
        y: fcr.samples.clone(),
        rate: tb.rate,
        block_id: block_id.into(),
    })
}

/// Shares of points per quadrant; `n` = sign of x, `p` = non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantFractions {
    pub np: f64,
    pub pp: f64,
    pub pn: f64,
    pub nn: f64,
}

impl QuadrantFractions {
    pub fn as_array(&self) -> [f64; 4] {
        [self.np, self.pp, self.pn, self.nn]
    }

    pub fn sum(&self) -> f64 {
        self.np + self.pp + self.pn + self.nn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantStats {
    pub fractions: QuadrantFractions,
    pub n_points: usize,
}

/// Quadrant of every point about the origin; a zero coordinate counts as
/// positive.
pub fn quadrant_fractions(lt: &LoopTrace) -> Result<QuadrantStats, LoopError> {
    if lt.is_empty() {
        return Err(LoopError::Empty);
    }
    let mut counts = [0usize; 4];
    for (&x, &y) in lt.x.iter().zip(&lt.y) {
        let slot = match (x >= 0.0, y >= 0.0) {
            (false, true) => 0,
            (true, true) => 1,
            (true, false) => 2,
            (false, false) => 3,
        };
        counts[slot] += 1;
    }
    let n = lt.len() as f64;
    Ok(QuadrantStats {
        fractions: QuadrantFractions {
            np: counts[0] as f64 / n,
            pp: counts[1] as f64 / n,
            pn: counts[2] as f64 / n,
            nn: counts[3] as f64 / n,
        },
        n_points: lt.len(),
    })
}

/// Skew magnitudes along the horizontal, vertical and diagonal directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTriple {
    pub h_s: f64,
    pub v_s: f64,
    pub d_s_skew: f64,
}

/// Fisher-Pearson moment skewness `m3 / m2^1.5`.
pub(crate) fn moment_skewness(v: &[f64], what: &'static str) -> Result<f64, LoopError> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in v {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 <= (1e-12 * scale).powi(2) {
        return Err(LoopError::DegenerateDistribution(what));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Absolute skewness of x, of y and of the projection `(x + y) / sqrt 2`.
pub fn axis_skews(lt: &LoopTrace) -> Result<SkewTriple, LoopError> {
    if lt.len() < 3 {
        return Err(LoopError::TooFewPoints(lt.len()));
    }
    let diag: Vec<f64> = lt.x.iter().zip(&lt.y).map(|(x, y)| (x + y) * FRAC_1_SQRT_2).collect();
    Ok(SkewTriple {
        h_s: moment_skewness(&lt.x, "horizontal")?.abs(),
        v_s: moment_skewness(&lt.y, "vertical")?.abs(),
        d_s_skew: moment_skewness(&diag, "diagonal")?.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewCorrelations {
    pub hv: CorrelationResult,
    pub hd: CorrelationResult,
    pub vd: CorrelationResult,
}

/// Pearson correlation across blocks of each pair of skew components.
pub fn skew_correlations(rows: &[SkewTriple]) -> Result<SkewCorrelations, LoopError> {
    if rows.len() < 3 {
        return Err(LoopError::TooFewBlocks(rows.len()));
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h_s).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.v_s).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.d_s_skew).collect();
    Ok(SkewCorrelations {
        hv: pearson_r(&h, &v)?,
        hd: pearson_r(&h, &d)?,
        vd: pearson_r(&v, &d)?,
    })
}

/// L1 distance between two quadrant occupancy vectors, in `[0, 2]`.
pub fn hysteresis_index(first: &QuadrantFractions, last: &QuadrantFractions) -> f64 {
    first.as_array().iter().zip(last.as_array()).map(|(a, b)| (a - b).abs()).sum()
}

/// One line of the per-block loop summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTableRow {
    pub condition: String,
    pub block: String,
    pub fractions: QuadrantFractions,
    /// Absent when a projection was degenerate.
    pub skew: Option<SkewTriple>,
}

pub fn loop_table_text(rows: &[LoopTableRow]) -> String {
    let mut out = CsvText::with_header(&LOOP_TABLE_HEADER);
    for r in rows {
        let f = r.fractions;
        out.row([
            r.condition.clone(),
            r.block.clone(),
            fmt_opt(Some(f.np)),
            fmt_opt(Some(f.pp)),
            fmt_opt(Some(f.pn)),
            fmt_opt(Some(f.nn)),
            fmt_opt(r.skew.map(|s| s.h_s)),
            fmt_opt(r.skew.map(|s| s.v_s)),
            fmt_opt(r.skew.map(|s| s.d_s_skew)),
        ]);
    }
    out.into_string()
}

pub fn write_loop_table(path: &Path, rows: &[LoopTableRow]) -> Result<(), IngestError> {
    write_atomic(path, &loop_table_text(rows))
}

pub fn read_loop_table(path: &Path) -> Result<Vec<LoopTableRow>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&LOOP_TABLE_HEADER, &[])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let f = |c| table.f64_at(i, c);
        let skew = match (table.opt_f64_at(i, 6)?, table.opt_f64_at(i, 7)?, table.opt_f64_at(i, 8)?) {
            (Some(h_s), Some(v_s), Some(d_s_skew)) => Some(SkewTriple { h_s, v_s, d_s_skew }),
            (None, None, None) => None,
            _ => return Err(IngestError::malformed(path, i + 2, "skew columns must be all present or all empty")),
        };
        out.push(LoopTableRow {
            condition: table.str_at(i, 0)?.to_string(),
            block: table.str_at(i, 1)?.to_string(),
            fractions: QuadrantFractions {
                np: f(2)?,
                pp: f(3)?,
                pn: f(4)?,
                nn: f(5)?,
            },
            skew,
        });
    }
    Ok(out)
}

/// Point dump for external plotting, full precision.
pub fn points_csv_text(lt: &LoopTrace) -> String {
    let mut out = String::with_capacity(lt.len() * 40 + 16);
    out.push_str("x_volts,y_volts\n");
    for (x, y) in lt.x.iter().zip(&lt.y) {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn read_points_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&POINTS_HEADER, &[])?;
    let mut x = Vec::with_capacity(table.rows.len());
    let mut y = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        x.push(table.f64_at(i, 0)?);
        y.push(table.f64_at(i, 1)?);
    }
    Ok((x, y))
}
