use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use super::design::Design;
use super::session::{validate_design, BlockData, Session, ValidationReport};
use crate::looptrace::{build_loop_trace, LoopError, LoopTrace};
use crate::metrics::io::MetricsRow;
use crate::metrics::{mpo, raw_peak, spikiness, ump, MetricsError, TrialMetrics, TrialRecord};
use crate::timeseries::{
    detect_peaks, lowpass_iir, rectify, running_avg_downsample, segment, EmgTrace, FilterSpec, Muscle, Segment,
    SignalError, WindowSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterSpec,
    /// Running-average length in input samples.
    pub avg_window: usize,
    pub target_rate: f64,
    /// Fixed window length for timed blocks.
    pub window_s: f64,
    pub min_peak_height: f64,
    /// Also compute spikiness per trial for reach blocks.
    pub trial_spikiness: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            avg_window: 50,
            target_rate: 30.0,
            window_s: 10.0,
            min_peak_height: 0.0,
            trial_spikiness: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("session does not match its design:\n{0}")]
    Invalid(ValidationReport),
    #[error("block {block}, {muscle}: {source}")]
    Signal {
        block: usize,
        muscle: Muscle,
        source: SignalError,
    },
    #[error("block {block}, trial {trial}: {source}")]
    Metrics {
        block: usize,
        trial: u32,
        source: MetricsError,
    },
    #[error("block {block}: {source}")]
    Loop { block: usize, source: LoopError },
}

/// A non-fatal problem; the affected field is left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineIssue {
    pub participant: String,
    pub block: usize,
    pub trial: u32,
    pub muscle: Muscle,
    pub error: MetricsError,
}

impl fmt::Display for PipelineIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, block {}, trial {}, {}: {}",
            self.participant, self.block, self.trial, self.muscle, self.error
        )
    }
}

/// Metric rows kept in canonical key order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn new(mut rows: Vec<MetricsRow>) -> Self {
        rows.sort_by(MetricsRow::key_cmp);
        Self { rows }
    }

    pub fn merge(tables: impl IntoIterator<Item = MetricsTable>) -> Self {
        Self::new(tables.into_iter().flat_map(|t| t.rows).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows that enter aggregates: everything except undefined-UMP rows.
    pub fn included(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| !is_excluded(&r.metrics))
    }
}

pub(crate) fn is_excluded(m: &TrialMetrics) -> bool {
    m.power_class == Some(crate::metrics::PowerClass::Undefined)
}

/// Signed conditioned channels of one block restricted to its analysed
/// segments.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLoop {
    pub participant: String,
    pub condition: String,
    pub block: usize,
    pub label: String,
    pub trace: LoopTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub metrics: MetricsTable,
    pub loops: Vec<BlockLoop>,
    /// Trials whose UMP is undefined (a perfect reach); both muscle rows of
    /// such a trial are flagged.
    pub excluded_trials: usize,
    pub issues: Vec<PipelineIssue>,
}

impl PipelineOutput {
    pub fn merge(outputs: impl IntoIterator<Item = PipelineOutput>) -> Self {
        let mut tables = Vec::new();
        let mut loops = Vec::new();
        let mut excluded_trials = 0;
        let mut issues = Vec::new();
        for o in outputs {
            tables.push(o.metrics);
            loops.extend(o.loops);
            excluded_trials += o.excluded_trials;
            issues.extend(o.issues);
        }
        loops.sort_by(|a, b| (&a.condition, a.block, &a.participant).cmp(&(&b.condition, b.block, &b.participant)));
        Self {
            metrics: MetricsTable::merge(tables),
            loops,
            excluded_trials,
            issues,
        }
    }
}

/// Lowpass, running-average downsampling and rectification of one channel.
/// Returns the signed conditioned trace and its rectified copy.
pub fn condition_channel(trace: &EmgTrace, cfg: &PipelineConfig) -> Result<(EmgTrace, EmgTrace), SignalError> {
    let filtered = lowpass_iir(trace, &cfg.filter)?;
    let signed = running_avg_downsample(&filtered, cfg.avg_window, cfg.target_rate)?;
    let rect = rectify(&signed);
    Ok((signed, rect))
}

/// Index ranges analysed in a block on the conditioned grid, paired with the
/// trial record they belong to and the row's trial-or-window number.
pub(crate) fn block_ranges(
    trace: &EmgTrace,
    trials: Option<&[TrialRecord]>,
    design: &Design,
    cfg: &PipelineConfig,
) -> Result<Vec<(usize, usize)>, SignalError> {
    let segs: Vec<Segment<'_>> = match trials {
        _ if design.is_timed() => segment(trace, &WindowSpec::FixedDuration(cfg.window_s))?,
        Some(trials) if trials.iter().all(|t| t.window.is_some()) && !trials.is_empty() => {
            // Averaging shortens the trace by one window; trials running
            // into that tail are cut at the last conditioned sample.
            let t_end = trace.t0 + trace.duration();
            let intervals = trials
                .iter()
                .map(|t| {
                    let (s, e) = t.window.expect("checked above");
                    (s, e.min(t_end))
                })
                .collect();
            segment(trace, &WindowSpec::TrialIntervals(intervals))?
        }
        Some(trials) => equal_split(trace, trials.len())?,
        None => return Ok(Vec::new()),
    };
    Ok(segs.iter().map(|s| (s.start, s.end)).collect())
}

fn equal_split(trace: &EmgTrace, parts: usize) -> Result<Vec<Segment<'_>>, SignalError> {
    if parts == 0 || trace.len() < parts {
        return Err(SignalError::InvalidWindow(format!(
            "cannot split {} samples into {parts} trials",
            trace.len()
        )));
    }
    let n = trace.len();
    Ok((0..parts)
        .map(|k| Segment {
            trace,
            start: k * n / parts,
            end: (k + 1) * n / parts,
        })
        .collect())
}

struct BlockResult {
    rows: Vec<MetricsRow>,
    loop_trace: BlockLoop,
    excluded: usize,
    issues: Vec<PipelineIssue>,
}

/// Validates the session, then processes its blocks in parallel.
pub fn run_pipeline(session: &Session, design: &Design, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let report = validate_design(session, design);
    if !report.is_ok() {
        return Err(PipelineError::Invalid(report));
    }
    let condition = design
        .condition(&session.condition)
        .map(|c| c.name.clone())
        .unwrap_or_else(|| session.condition.clone());

    let blocks = session
        .blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| process_block(session, &condition, i + 1, b, design, cfg))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut loops = Vec::new();
    let mut excluded_trials = 0;
    let mut issues = Vec::new();
    for b in blocks {
        rows.extend(b.rows);
        loops.push(b.loop_trace);
        excluded_trials += b.excluded;
        issues.extend(b.issues);
    }
    Ok(PipelineOutput {
        metrics: MetricsTable::new(rows),
        loops,
        excluded_trials,
        issues,
    })
}

fn process_block(
    session: &Session,
    condition: &str,
    block: usize,
    b: &BlockData,
    design: &Design,
    cfg: &PipelineConfig,
) -> Result<BlockResult, PipelineError> {
    let signal_err = |muscle: &Muscle| {
        let muscle = muscle.clone();
        move |source| PipelineError::Signal { block, muscle, source }
    };
    let (tb_signed, tb_rect) = condition_channel(&b.tb, cfg).map_err(signal_err(&Muscle::Tb))?;
    let (fcr_signed, fcr_rect) = condition_channel(&b.fcr, cfg).map_err(signal_err(&Muscle::Fcr))?;

    let mut trials: Option<Vec<TrialRecord>> = b.trials.clone();
    if let Some(t) = trials.as_mut() {
        t.sort_by_key(|r| r.trial_index);
    }
    let trials = if design.is_timed() { None } else { trials };
    let ranges = block_ranges(&tb_rect, trials.as_deref(), design, cfg).map_err(signal_err(&Muscle::Tb))?;

    let mut rows = Vec::with_capacity(ranges.len() * 2);
    let mut issues = Vec::new();
    let mut excluded = 0;
    for (k, &(start, end)) in ranges.iter().enumerate() {
        let record = trials.as_ref().map(|t| &t[k]);
        let trial = record.map_or(k as u32 + 1, |r| r.trial_index);
        let metrics_err = |source| PipelineError::Metrics { block, trial, source };
        let trial_mpo = record.map(mpo).transpose().map_err(metrics_err)?;
        let mut undefined = false;
        for rect in [&tb_rect, &fcr_rect] {
            let seg = Segment { trace: rect, start, end };
            let peaks = detect_peaks(&seg, cfg.min_peak_height).map_err(signal_err(&rect.muscle))?;
            let rp = raw_peak(peaks.max_amplitude, seg.duration()).map_err(metrics_err)?;
            let (ump_value, power_class) = match trial_mpo {
                Some(m) => {
                    let u = ump(rp, m).map_err(metrics_err)?;
                    (u.value, Some(u.class))
                }
                None => (None, None),
            };
            let spikiness_z = if design.is_timed() || cfg.trial_spikiness {
                match spikiness(seg.samples()) {
                    Ok(z) => Some(z),
                    Err(error) => {
                        issues.push(PipelineIssue {
                            participant: session.participant_id.clone(),
                            block,
                            trial,
                            muscle: rect.muscle.clone(),
                            error,
                        });
                        None
                    }
                }
            } else {
                None
            };
            let metrics = TrialMetrics {
                rp,
                mpo: trial_mpo,
                ump: ump_value,
                power_class,
                spikiness_z,
            };
            undefined |= is_excluded(&metrics);
            rows.push(MetricsRow {
                participant: session.participant_id.clone(),
                condition: condition.to_string(),
                block,
                trial,
                muscle: rect.muscle.clone(),
                metrics,
            });
        }
        excluded += usize::from(undefined);
    }

    let full = build_loop_trace(&tb_signed, &fcr_signed, b.label.clone()).map_err(|source| PipelineError::Loop { block, source })?;
    Ok(BlockResult {
        rows,
        loop_trace: BlockLoop {
            participant: session.participant_id.clone(),
            condition: condition.to_string(),
            block,
            label: b.label.clone(),
            trace: full.select(&ranges),
        },
        excluded,
        issues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::design::ExperimentId;

    fn constant(level: f64, seconds: f64, muscle: Muscle) -> EmgTrace {
        EmgTrace::new(vec![level; (seconds * 1000.0) as usize], 1000.0, muscle, 0.0).unwrap()
    }

    fn lul_session(level: f64, perfect: bool) -> Session {
        let blocks = ["L", "U", "L"]
            .iter()
            .enumerate()
            .map(|(i, l)| BlockData {
                label: l.to_string(),
                tb: constant(level, 33.0, Muscle::Tb),
                fcr: constant(level, 33.0, Muscle::Fcr),
                trials: Some(
                    (1..=16)
                        .map(|k| TrialRecord {
                            block_id: (i + 1).to_string(),
                            trial_index: k,
                            d_req: 2.0,
                            d_moved: if perfect { 2.0 } else { 1.0 },
                            window: Some(((k - 1) as f64 * 2.0, k as f64 * 2.0)),
                        })
                        .collect(),
                ),
            })
            .collect();
        Session {
            participant_id: "p1".into(),
            experiment: ExperimentId::E1,
            condition: "L, U, L".into(),
            blocks,
        }
    }

    #[test]
    fn perfect_trials_are_all_flagged() {
        let out = run_pipeline(&lul_session(0.2, true), &Design::e1(), &PipelineConfig::default()).unwrap();
        assert_eq!(out.metrics.len(), 3 * 16 * 2);
        assert_eq!(out.excluded_trials, 48);
        assert_eq!(out.metrics.included().count(), 0);
        assert!(out.metrics.rows.iter().all(|r| r.condition == "LUL"));
    }

    #[test]
    fn zero_signal_gives_zero_measures() {
        let cfg = PipelineConfig {
            trial_spikiness: true,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&lul_session(0.0, false), &Design::e1(), &cfg).unwrap();
        assert!(out.metrics.rows.iter().all(|r| r.metrics.rp == 0.0 && r.metrics.ump == Some(0.0)));
        assert_eq!(out.issues.len(), 96);
        assert!(out.issues.iter().all(|i| i.error == MetricsError::ZeroMeanWindow));
    }

    #[test]
    fn constant_level_peak_rate() {
        let out = run_pipeline(&lul_session(0.6, false), &Design::e1(), &PipelineConfig::default()).unwrap();
        let r = &out.metrics.rows[0];
        // A constant survives the unit-DC filter and averaging (up to the
        // short filter transient at the start of trial 1).
        let r2 = out.metrics.rows.iter().find(|r| r.trial == 2).unwrap();
        assert!((r2.metrics.rp - 0.3).abs() < 1e-9, "{}", r2.metrics.rp);
        assert!(r.metrics.rp > 0.0);
        assert_eq!(r2.metrics.mpo, Some(0.5));
        assert!((r2.metrics.ump.unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn invalid_session_is_refused() {
        let mut s = lul_session(0.1, false);
        s.blocks.pop();
        assert!(matches!(
            run_pipeline(&s, &Design::e1(), &PipelineConfig::default()),
            Err(PipelineError::Invalid(_))
        ));
    }

    #[test]
    fn equal_split_without_windows() {
        let mut s = lul_session(0.5, false);
        for b in &mut s.blocks {
            for t in b.trials.as_mut().unwrap() {
                t.window = None;
            }
        }
        let out = run_pipeline(&s, &Design::e1(), &PipelineConfig::default()).unwrap();
        assert_eq!(out.metrics.len(), 96);
        let lt = &out.loops[0].trace;
        assert_eq!(lt.len(), ((33000 - 50) as f64 * 30.0 / 1000.0).floor() as usize + 1);
    }
}
