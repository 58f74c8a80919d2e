//! Condition-level tables built from metric rows and block loop traces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::pipeline::{is_excluded, BlockLoop};
use crate::looptrace::{axis_skews, quadrant_fractions, skew_correlations, LoopTableRow, LoopTrace};
use crate::metrics::io::MetricsRow;
use crate::metrics::{ump_histogram, MetricsError, TrialMetrics, UmpHistogram};
use crate::stats::{paired_t_test, Band, CorrelationResult, Significance, StatsError, TestResult};
use crate::table::{fmt_num, fmt_opt, CsvTable, CsvText, IngestError};
use crate::timeseries::Muscle;

pub const BLOCK_MEANS_HEADER: [&str; 6] = ["condition", "block", "muscle", "measure", "n", "mean"];
pub const BASELINE_HEADER: [&str; 6] = ["condition", "block", "muscle", "measure", "mean", "percent_of_baseline"];
pub const HISTOGRAM_HEADER: [&str; 7] = ["condition", "block", "muscle", "class_lo", "class_hi", "count", "proportion"];
pub const TTEST_HEADER: [&str; 10] =
    ["condition", "muscle", "measure", "comparison", "n", "t", "df", "p", "p_adjusted", "significance"];
pub const CORRELATION_HEADER: [&str; 4] = ["condition", "pair", "r", "band"];

/// Written in place of a class when the statistic could not be computed.
pub const NOT_AVAILABLE: &str = "NA";

pub const CONTROL_CONDITION: &str = "control";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("baseline normalisation needs a `{CONTROL_CONDITION}` condition")]
    MissingControlCondition,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Rp,
    Mpo,
    Ump,
    Spikiness,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::Rp => "rp",
            Measure::Mpo => "mpo",
            Measure::Ump => "ump",
            Measure::Spikiness => "spikiness",
        }
    }

    pub fn of(&self, m: &TrialMetrics) -> Option<f64> {
        match self {
            Measure::Rp => Some(m.rp),
            Measure::Mpo => m.mpo,
            Measure::Ump => m.ump,
            Measure::Spikiness => m.spikiness_z,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rp" => Ok(Measure::Rp),
            "mpo" => Ok(Measure::Mpo),
            "ump" => Ok(Measure::Ump),
            "spikiness" => Ok(Measure::Spikiness),
            other => Err(format!("unknown measure `{other}` (expected rp, mpo, ump or spikiness)")),
        }
    }
}

/// UMP when any row carries one, otherwise the raw peak (timed blocks).
pub fn default_measure(rows: &[MetricsRow]) -> Measure {
    if rows.iter().any(|r| r.metrics.ump.is_some()) {
        Measure::Ump
    } else {
        Measure::Rp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Mean over every trial of every participant.
    #[default]
    Trials,
    /// Mean of per-participant means.
    SubjectMeans,
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trials" => Ok(Grouping::Trials),
            "subject-means" => Ok(Grouping::SubjectMeans),
            other => Err(format!("unknown grouping `{other}` (expected trials or subject-means)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// One pair per participant: their mean in each of the two blocks.
    #[default]
    BlockMeans,
    /// One pair per participant and trial number.
    Trials,
}

impl FromStr for Pairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block-means" => Ok(Pairing::BlockMeans),
            "trials" => Ok(Pairing::Trials),
            other => Err(format!("unknown pairing `{other}` (expected block-means or trials)")),
        }
    }
}

type CellKey = (String, usize, Muscle);

// (condition, block, muscle) -> participant -> [(trial, value)]
fn cells(rows: &[MetricsRow], measure: Measure) -> BTreeMap<CellKey, BTreeMap<String, Vec<(u32, f64)>>> {
    let mut out: BTreeMap<CellKey, BTreeMap<String, Vec<(u32, f64)>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !is_excluded(&r.metrics)) {
        if let Some(v) = measure.of(&r.metrics) {
            out.entry((r.condition.clone(), r.block, r.muscle.clone()))
                .or_default()
                .entry(r.participant.clone())
                .or_default()
                .push((r.trial, v));
        }
    }
    out
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    s / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMean {
    pub condition: String,
    pub block: usize,
    pub muscle: Muscle,
    pub measure: Measure,
    /// Values averaged: trials or participants depending on grouping.
    pub n: usize,
    pub mean: f64,
}

/// Per-(condition, block, muscle) mean of a measure; undefined-UMP rows are
/// left out.
pub fn block_means(rows: &[MetricsRow], measure: Measure, grouping: Grouping) -> Vec<BlockMean> {
    cells(rows, measure)
        .into_iter()
        .map(|((condition, block, muscle), by_subject)| {
            let (n, m) = match grouping {
                Grouping::Trials => {
                    let all: Vec<f64> = by_subject.values().flatten().map(|&(_, v)| v).collect();
                    (all.len(), mean(all.iter().copied()))
                }
                Grouping::SubjectMeans => {
                    let subj: Vec<f64> = by_subject.values().map(|v| mean(v.iter().map(|&(_, x)| x))).collect();
                    (subj.len(), mean(subj.iter().copied()))
                }
            };
            BlockMean {
                condition,
                block,
                muscle,
                measure,
                n,
                mean: m,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub mean: BlockMean,
    /// `None` when the control mean at that block is zero or missing.
    pub percent: Option<f64>,
}

/// Each block mean as a percentage of the control condition's mean for the
/// same block and muscle.
pub fn percent_of_baseline(means: &[BlockMean]) -> Result<Vec<BaselineRow>, AggregateError> {
    let control: BTreeMap<(usize, &Muscle), f64> = means
        .iter()
        .filter(|m| m.condition.eq_ignore_ascii_case(CONTROL_CONDITION))
        .map(|m| ((m.block, &m.muscle), m.mean))
        .collect();
    if control.is_empty() {
        return Err(AggregateError::MissingControlCondition);
    }
    Ok(means
        .iter()
        .map(|m| BaselineRow {
            mean: m.clone(),
            percent: control
                .get(&(m.block, &m.muscle))
                .filter(|&&c| c != 0.0)
                .map(|c| 100.0 * m.mean / c),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub condition: String,
    pub muscle: Muscle,
    pub measure: Measure,
    pub block_a: usize,
    pub block_b: usize,
    pub n_pairs: usize,
    pub result: Result<TestResult, StatsError>,
}

impl TTestRow {
    pub fn comparison(&self) -> String {
        format!("{} vs {}", self.block_a, self.block_b)
    }
}

/// Paired t-tests between every pair of blocks within each condition and
/// muscle. `family_size` overrides the Bonferroni family, which otherwise
/// is the number of block pairs in the condition.
pub fn block_ttests(rows: &[MetricsRow], measure: Measure, pairing: Pairing, family_size: Option<usize>) -> Vec<TTestRow> {
    let cells = cells(rows, measure);
    let mut groups: BTreeMap<(String, Muscle), BTreeMap<usize, &BTreeMap<String, Vec<(u32, f64)>>>> = BTreeMap::new();
    for ((condition, block, muscle), subj) in &cells {
        groups.entry((condition.clone(), muscle.clone())).or_default().insert(*block, subj);
    }
    let mut out = Vec::new();
    for ((condition, muscle), blocks) in groups {
        let ids: Vec<usize> = blocks.keys().copied().collect();
        let m = family_size.unwrap_or(ids.len() * ids.len().saturating_sub(1) / 2).max(1);
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let (xa, xb) = pairs(blocks[&a], blocks[&b], pairing);
                let result = paired_t_test(&xa, &xb).and_then(|r| r.with_family(m));
                out.push(TTestRow {
                    condition: condition.clone(),
                    muscle: muscle.clone(),
                    measure,
                    block_a: a,
                    block_b: b,
                    n_pairs: xa.len(),
                    result,
                });
            }
        }
    }
    out
}

fn pairs(
    a: &BTreeMap<String, Vec<(u32, f64)>>,
    b: &BTreeMap<String, Vec<(u32, f64)>>,
    pairing: Pairing,
) -> (Vec<f64>, Vec<f64>) {
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for (participant, va) in a {
        let Some(vb) = b.get(participant) else { continue };
        match pairing {
            Pairing::BlockMeans => {
                xa.push(mean(va.iter().map(|&(_, v)| v)));
                xb.push(mean(vb.iter().map(|&(_, v)| v)));
            }
            Pairing::Trials => {
                let lookup: BTreeMap<u32, f64> = vb.iter().copied().collect();
                for &(trial, v) in va {
                    if let Some(&w) = lookup.get(&trial) {
                        xa.push(v);
                        xb.push(w);
                    }
                }
            }
        }
    }
    (xa, xb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub condition: String,
    pub block: usize,
    pub muscle: Muscle,
    pub histogram: UmpHistogram,
}

/// Histogram of defined UMP values per (condition, block, muscle), after
/// multiplying by `ump_scale`.
pub fn ump_histograms(rows: &[MetricsRow], edges: &[f64], ump_scale: f64) -> Result<Vec<HistogramRow>, AggregateError> {
    let mut out = Vec::new();
    for ((condition, block, muscle), subj) in cells(rows, Measure::Ump) {
        let values: Vec<f64> = subj.values().flatten().map(|&(_, v)| v * ump_scale).collect();
        out.push(HistogramRow {
            condition,
            block,
            muscle,
            histogram: ump_histogram(&values, edges)?,
        });
    }
    Ok(out)
}

/// Loop traces pooled across participants per (condition, block).
pub fn pooled_loops(loops: &[BlockLoop]) -> Vec<(String, usize, LoopTrace)> {
    let mut pooled: BTreeMap<(String, usize), Vec<&BlockLoop>> = BTreeMap::new();
    for l in loops {
        pooled.entry((l.condition.clone(), l.block)).or_default().push(l);
    }
    pooled
        .into_iter()
        .map(|((condition, block), mut members)| {
            members.sort_by(|a, b| a.participant.cmp(&b.participant));
            let mut lt = members[0].trace.clone();
            for m in &members[1..] {
                lt.extend(&m.trace);
            }
            (condition, block, lt)
        })
        .collect()
}

/// Quadrant fractions and skews of every pooled block trace. Empty traces
/// are skipped.
pub fn loop_table(loops: &[BlockLoop]) -> Vec<LoopTableRow> {
    pooled_loops(loops)
        .into_iter()
        .filter_map(|(condition, block, lt)| {
            let q = quadrant_fractions(&lt).ok()?;
            Some(LoopTableRow {
                condition,
                block: block.to_string(),
                fractions: q.fractions,
                skew: axis_skews(&lt).ok(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub condition: String,
    pub pair: &'static str,
    pub result: Option<CorrelationResult>,
}

pub const SKEW_PAIRS: [&str; 3] = ["h_s-v_s", "h_s-d_s", "v_s-d_s"];

/// Across-block skew correlations per condition, in table order. A
/// condition with a missing skew or too few blocks gets empty results.
pub fn condition_correlations(table: &[LoopTableRow]) -> Vec<CorrelationRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_cond: BTreeMap<&str, Vec<&LoopTableRow>> = BTreeMap::new();
    for r in table {
        if !by_cond.contains_key(r.condition.as_str()) {
            order.push(&r.condition);
        }
        by_cond.entry(&r.condition).or_default().push(r);
    }
    let mut out = Vec::new();
    for cond in order {
        let skews: Option<Vec<_>> = by_cond[cond].iter().map(|r| r.skew).collect();
        let corr = skews.and_then(|s| skew_correlations(&s).ok());
        let results = match corr {
            Some(c) => [Some(c.hv), Some(c.hd), Some(c.vd)],
            None => [None; 3],
        };
        for (pair, result) in SKEW_PAIRS.into_iter().zip(results) {
            out.push(CorrelationRow {
                condition: cond.to_string(),
                pair,
                result,
            });
        }
    }
    out
}

pub fn block_means_text(means: &[BlockMean]) -> String {
    let mut out = CsvText::with_header(&BLOCK_MEANS_HEADER);
    for m in means {
        out.row([
            m.condition.clone(),
            m.block.to_string(),
            m.muscle.to_string(),
            m.measure.to_string(),
            m.n.to_string(),
            fmt_num(m.mean),
        ]);
    }
    out.into_string()
}

pub fn baseline_text(rows: &[BaselineRow]) -> String {
    let mut out = CsvText::with_header(&BASELINE_HEADER);
    for r in rows {
        let m = &r.mean;
        out.row([
            m.condition.clone(),
            m.block.to_string(),
            m.muscle.to_string(),
            m.measure.to_string(),
            fmt_num(m.mean),
            fmt_opt(r.percent),
        ]);
    }
    out.into_string()
}

/// Open-ended classes leave the unbounded side empty.
pub fn histogram_text(rows: &[HistogramRow]) -> String {
    let mut out = CsvText::with_header(&HISTOGRAM_HEADER);
    for r in rows {
        let total = r.histogram.total();
        for (lo, hi, count) in r.histogram.classes() {
            let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            out.row([
                r.condition.clone(),
                r.block.to_string(),
                r.muscle.to_string(),
                fmt_opt(Some(lo).filter(|v| v.is_finite())),
                fmt_opt(Some(hi).filter(|v| v.is_finite())),
                count.to_string(),
                fmt_num(share),
            ]);
        }
    }
    out.into_string()
}

pub fn ttests_text(rows: &[TTestRow]) -> String {
    let mut out = CsvText::with_header(&TTEST_HEADER);
    for r in rows {
        let (t, df, p, adj, class) = match &r.result {
            Ok(x) => (
                fmt_num(x.t_stat),
                x.df.to_string(),
                fmt_num(x.p_value),
                fmt_num(x.p_adjusted),
                x.significance.to_string(),
            ),
            Err(_) => (String::new(), String::new(), String::new(), String::new(), NOT_AVAILABLE.to_string()),
        };
        out.row([
            r.condition.clone(),
            r.muscle.to_string(),
            r.measure.to_string(),
            r.comparison(),
            r.n_pairs.to_string(),
            t,
            df,
            p,
            adj,
            class,
        ]);
    }
    out.into_string()
}

pub fn correlations_text(rows: &[CorrelationRow]) -> String {
    let mut out = CsvText::with_header(&CORRELATION_HEADER);
    for r in rows {
        out.row([
            r.condition.clone(),
            r.pair.to_string(),
            fmt_opt(r.result.map(|c| c.r)),
            r.result.map_or(NOT_AVAILABLE.to_string(), |c| c.band.to_string()),
        ]);
    }
    out.into_string()
}

fn parse<T: FromStr>(table: &CsvTable, i: usize, col: usize, path: &Path) -> Result<T, IngestError>
where
    T::Err: fmt::Display,
{
    table
        .str_at(i, col)?
        .parse()
        .map_err(|e: T::Err| IngestError::malformed(path, i + 2, e.to_string()))
}

fn parse_uint(table: &CsvTable, i: usize, col: usize, path: &Path) -> Result<usize, IngestError> {
    table
        .str_at(i, col)?
        .parse()
        .map_err(|_| IngestError::malformed(path, i + 2, format!("column {} must be an integer", col + 1)))
}

pub fn read_block_means(path: &Path) -> Result<Vec<BlockMean>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&BLOCK_MEANS_HEADER, &[])?;
    (0..table.rows.len())
        .map(|i| {
            Ok(BlockMean {
                condition: table.str_at(i, 0)?.to_string(),
                block: parse_uint(&table, i, 1, path)?,
                muscle: parse(&table, i, 2, path)?,
                measure: parse(&table, i, 3, path)?,
                n: parse_uint(&table, i, 4, path)?,
                mean: table.f64_at(i, 5)?,
            })
        })
        .collect()
}

pub fn read_baseline(path: &Path) -> Result<Vec<BaselineRow>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&BASELINE_HEADER, &[])?;
    (0..table.rows.len())
        .map(|i| {
            Ok(BaselineRow {
                mean: BlockMean {
                    condition: table.str_at(i, 0)?.to_string(),
                    block: parse_uint(&table, i, 1, path)?,
                    muscle: parse(&table, i, 2, path)?,
                    measure: parse(&table, i, 3, path)?,
                    n: 0,
                    mean: table.f64_at(i, 4)?,
                },
                percent: table.opt_f64_at(i, 5)?,
            })
        })
        .collect()
}

/// One parsed line of a histogram table.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramLine {
    pub condition: String,
    pub block: usize,
    pub muscle: Muscle,
    pub class_lo: f64,
    pub class_hi: f64,
    pub count: usize,
    pub proportion: f64,
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<HistogramLine>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&HISTOGRAM_HEADER, &[])?;
    (0..table.rows.len())
        .map(|i| {
            Ok(HistogramLine {
                condition: table.str_at(i, 0)?.to_string(),
                block: parse_uint(&table, i, 1, path)?,
                muscle: parse(&table, i, 2, path)?,
                class_lo: table.opt_f64_at(i, 3)?.unwrap_or(f64::NEG_INFINITY),
                class_hi: table.opt_f64_at(i, 4)?.unwrap_or(f64::INFINITY),
                count: parse_uint(&table, i, 5, path)?,
                proportion: table.f64_at(i, 6)?,
            })
        })
        .collect()
}

/// One parsed line of a t-test table; statistics are `None` for NA rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestLine {
    pub condition: String,
    pub muscle: Muscle,
    pub measure: Measure,
    pub comparison: String,
    pub n_pairs: usize,
    pub result: Option<TestResult>,
}

pub fn read_ttests(path: &Path) -> Result<Vec<TTestLine>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&TTEST_HEADER, &[])?;
    (0..table.rows.len())
        .map(|i| {
            let result = match table.str_at(i, 9)? {
                NOT_AVAILABLE => None,
                class => Some(TestResult {
                    t_stat: table.f64_at(i, 5)?,
                    df: parse_uint(&table, i, 6, path)?,
                    p_value: table.f64_at(i, 7)?,
                    p_adjusted: table.f64_at(i, 8)?,
                    significance: class
                        .parse::<Significance>()
                        .map_err(|e| IngestError::malformed(path, i + 2, e))?,
                }),
            };
            Ok(TTestLine {
                condition: table.str_at(i, 0)?.to_string(),
                muscle: parse(&table, i, 1, path)?,
                measure: parse(&table, i, 2, path)?,
                comparison: table.str_at(i, 3)?.to_string(),
                n_pairs: parse_uint(&table, i, 4, path)?,
                result,
            })
        })
        .collect()
}

/// One parsed correlation line; `None` for NA rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationLine {
    pub condition: String,
    pub pair: String,
    pub r: Option<(f64, Band)>,
}

pub fn read_correlations(path: &Path) -> Result<Vec<CorrelationLine>, IngestError> {
    let table = CsvTable::read(path)?;
    table.expect_header(&CORRELATION_HEADER, &[])?;
    (0..table.rows.len())
        .map(|i| {
            let r = match table.str_at(i, 3)? {
                NOT_AVAILABLE => None,
                band => Some((
                    table.f64_at(i, 2)?,
                    band.parse::<Band>().map_err(|e| IngestError::malformed(path, i + 2, e))?,
                )),
            };
            Ok(CorrelationLine {
                condition: table.str_at(i, 0)?.to_string(),
                pair: table.str_at(i, 1)?.to_string(),
                r,
            })
        })
        .collect()
}
