use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{labels_match, Design, ExperimentId, BLOCK_DURATION_TOLERANCE_S};
use crate::metrics::io::read_trials_csv;
use crate::metrics::TrialRecord;
use crate::table::IngestError;
use crate::timeseries::io::read_emg_csv;
use crate::timeseries::{EmgTrace, Muscle};

/// On-disk session description; CSV paths are relative to the data root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub participant_id: String,
    pub experiment: ExperimentId,
    pub condition: String,
    pub blocks: Vec<BlockConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub label: String,
    pub tb_csv: String,
    pub fcr_csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_csv: Option<String>,
}

impl SessionConfig {
    pub fn read(path: &Path) -> Result<Self, IngestError> {
        if !path.is_file() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| IngestError::malformed(path, e.line(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockData {
    pub label: String,
    pub tb: EmgTrace,
    pub fcr: EmgTrace,
    /// Trial records of reach blocks; `None` when no trial file is given.
    pub trials: Option<Vec<TrialRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub participant_id: String,
    pub experiment: ExperimentId,
    pub condition: String,
    pub blocks: Vec<BlockData>,
}

/// Reads a session config and every file it references. `data_root`
/// defaults to the directory holding the config.
pub fn load_session(config_path: &Path, data_root: Option<&Path>) -> Result<Session, IngestError> {
    let cfg = SessionConfig::read(config_path)?;
    let root: PathBuf = match data_root {
        Some(r) => r.to_path_buf(),
        None => config_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let blocks = cfg
        .blocks
        .par_iter()
        .map(|b| -> Result<BlockData, IngestError> {
            let tb = read_emg_csv(&root.join(&b.tb_csv), Muscle::Tb)?;
            let fcr = read_emg_csv(&root.join(&b.fcr_csv), Muscle::Fcr)?;
            let trials = b.trials_csv.as_ref().map(|p| read_trials_csv(&root.join(p))).transpose()?;
            Ok(BlockData {
                label: b.label.clone(),
                tb,
                fcr,
                trials,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Session {
        participant_id: cfg.participant_id,
        experiment: cfg.experiment,
        condition: cfg.condition,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    ExperimentMismatch,
    UnknownCondition,
    BlockCount,
    BlockLabel,
    MissingTrials,
    TrialCount,
    TrialNumbering,
    TrialWindow,
    BlockDuration,
    ChannelMismatch,
}

/// A design violation. Block numbers are 1-based positions.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ExperimentMismatch { expected: ExperimentId, found: ExperimentId },
    UnknownCondition { condition: String },
    BlockCount { expected: usize, found: usize },
    BlockLabel { block: usize, expected: String, found: String },
    MissingTrials { block: usize },
    TrialCount { block: usize, expected: usize, found: usize },
    TrialNumbering { block: usize, message: String },
    TrialWindow { block: usize, trial: u32, message: String },
    BlockDuration { block: usize, muscle: Muscle, expected_s: f64, found_s: f64 },
    ChannelMismatch { block: usize, message: String },
}

impl Violation {
    pub fn kind(&self) -> ViolationKind {
        match self {
            Violation::ExperimentMismatch { .. } => ViolationKind::ExperimentMismatch,
            Violation::UnknownCondition { .. } => ViolationKind::UnknownCondition,
            Violation::BlockCount { .. } => ViolationKind::BlockCount,
            Violation::BlockLabel { .. } => ViolationKind::BlockLabel,
            Violation::MissingTrials { .. } => ViolationKind::MissingTrials,
            Violation::TrialCount { .. } => ViolationKind::TrialCount,
            Violation::TrialNumbering { .. } => ViolationKind::TrialNumbering,
            Violation::TrialWindow { .. } => ViolationKind::TrialWindow,
            Violation::BlockDuration { .. } => ViolationKind::BlockDuration,
            Violation::ChannelMismatch { .. } => ViolationKind::ChannelMismatch,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ExperimentMismatch { expected, found } => {
                write!(f, "session is {found} but the design is {expected}")
            }
            Violation::UnknownCondition { condition } => write!(f, "unknown condition `{condition}`"),
            Violation::BlockCount { expected, found } => write!(f, "expected {expected} blocks, found {found}"),
            Violation::BlockLabel { block, expected, found } => {
                write!(f, "block {block}: expected label `{expected}`, found `{found}`")
            }
            Violation::MissingTrials { block } => write!(f, "block {block}: no trial records"),
            Violation::TrialCount { block, expected, found } => {
                write!(f, "block {block}: expected {expected} trials, found {found}")
            }
            Violation::TrialNumbering { block, message } => write!(f, "block {block}: {message}"),
            Violation::TrialWindow { block, trial, message } => write!(f, "block {block}, trial {trial}: {message}"),
            Violation::BlockDuration { block, muscle, expected_s, found_s } => write!(
                f,
                "block {block}: {muscle} recording lasts {found_s:.3} s, expected {expected_s} s ± {BLOCK_DURATION_TOLERANCE_S} s"
            ),
            Violation::ChannelMismatch { block, message } => write!(f, "block {block}: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> Vec<ViolationKind> {
        self.violations.iter().map(Violation::kind).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a session against its design and collects every violation.
pub fn validate_design(session: &Session, design: &Design) -> ValidationReport {
    let mut v = Vec::new();
    if session.experiment != design.experiment {
        v.push(Violation::ExperimentMismatch {
            expected: design.experiment,
            found: session.experiment,
        });
    }
    let layout = design.condition(&session.condition);
    if layout.is_none() {
        v.push(Violation::UnknownCondition {
            condition: session.condition.clone(),
        });
    }
    if let Some(layout) = layout {
        if layout.blocks.len() != session.blocks.len() {
            v.push(Violation::BlockCount {
                expected: layout.blocks.len(),
                found: session.blocks.len(),
            });
        }
        for (i, (want, got)) in layout.blocks.iter().zip(&session.blocks).enumerate() {
            if !labels_match(want, &got.label) {
                v.push(Violation::BlockLabel {
                    block: i + 1,
                    expected: want.clone(),
                    found: got.label.clone(),
                });
            }
        }
    }

    for (i, b) in session.blocks.iter().enumerate() {
        let block = i + 1;
        check_channels(block, b, &mut v);
        if let Some(expected) = design.trials_per_block {
            check_trials(block, b, expected, &mut v);
        }
        if let Some(nominal) = design.block_duration_s {
            for t in [&b.tb, &b.fcr] {
                let found = t.duration();
                if (found - nominal).abs() > BLOCK_DURATION_TOLERANCE_S {
                    v.push(Violation::BlockDuration {
                        block,
                        muscle: t.muscle.clone(),
                        expected_s: nominal,
                        found_s: found,
                    });
                }
            }
        }
    }
    ValidationReport { violations: v }
}

fn check_channels(block: usize, b: &BlockData, v: &mut Vec<Violation>) {
    let (tb, fcr) = (&b.tb, &b.fcr);
    let mut problems = Vec::new();
    if (tb.rate - fcr.rate).abs() > 1e-9 * tb.rate {
        problems.push(format!("channel rates differ ({} Hz vs {} Hz)", tb.rate, fcr.rate));
    }
    if tb.len() != fcr.len() {
        problems.push(format!("channel lengths differ ({} vs {} samples)", tb.len(), fcr.len()));
    }
    if (tb.t0 - fcr.t0).abs() > 1.0 / tb.rate {
        problems.push(format!("channel start times differ ({} s vs {} s)", tb.t0, fcr.t0));
    }
    for message in problems {
        v.push(Violation::ChannelMismatch { block, message });
    }
}

fn check_trials(block: usize, b: &BlockData, expected: usize, v: &mut Vec<Violation>) {
    let Some(trials) = &b.trials else {
        v.push(Violation::MissingTrials { block });
        return;
    };
    if trials.len() != expected {
        v.push(Violation::TrialCount {
            block,
            expected,
            found: trials.len(),
        });
    }
    let mut seen = vec![false; expected + 1];
    for t in trials {
        let idx = t.trial_index as usize;
        if idx == 0 || idx > expected {
            v.push(Violation::TrialNumbering {
                block,
                message: format!("trial index {idx} outside 1..={expected}"),
            });
        } else if std::mem::replace(&mut seen[idx], true) {
            v.push(Violation::TrialNumbering {
                block,
                message: format!("trial {idx} listed more than once"),
            });
        }
        if t.block_id.trim() != block.to_string() && !labels_match(&t.block_id, &b.label) {
            v.push(Violation::TrialNumbering {
                block,
                message: format!("trial {} is tagged with block `{}`", t.trial_index, t.block_id),
            });
        }
    }

    let with_windows = trials.iter().filter(|t| t.window.is_some()).count();
    if with_windows != 0 && with_windows != trials.len() {
        v.push(Violation::TrialNumbering {
            block,
            message: "either every trial or no trial must carry a time window".into(),
        });
        return;
    }
    let (start, end) = (b.tb.t0, b.tb.t0 + b.tb.duration());
    let mut prev_end = f64::NEG_INFINITY;
    for t in trials {
        if let Some((s, e)) = t.window {
            if s < start - 1e-9 || e > end + 1e-9 {
                v.push(Violation::TrialWindow {
                    block,
                    trial: t.trial_index,
                    message: format!("window [{s}, {e}) lies outside the recording [{start}, {end})"),
                });
            }
            if s < prev_end - 1e-9 {
                v.push(Violation::TrialWindow {
                    block,
                    trial: t.trial_index,
                    message: "window overlaps or precedes the previous trial".into(),
                });
            }
            prev_end = e;
        }
    }
}
