use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{oracle_metrics, OracleWindows};
use super::{gen_trace, Component, SynthError, SynthSpec};
use crate::experiment::{BlockConfig, Design, MetricsTable, PipelineConfig, SessionConfig, SURFACE_BLOCK_SECONDS};
use crate::metrics::io::{write_metrics_csv, write_trials_csv, MetricsRow};
use crate::metrics::TrialRecord;
use crate::timeseries::io::write_emg_csv;
use crate::timeseries::Muscle;

/// One trial (reach blocks) or one fixed window (timed blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanTrial {
    pub apex_tb: f64,
    pub apex_fcr: f64,
    /// `(d_req, d_moved)`; required for reach blocks, ignored for timed ones.
    pub distances: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionPlan {
    pub blocks: Vec<Vec<PlanTrial>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub participant_id: String,
    pub rate: f64,
    /// Length of each reach trial.
    pub trial_s: f64,
    /// Recording kept after the last trial or window.
    pub tail_s: f64,
    pub noise_sigma: f64,
    /// Amplitude of the sine background on both channels.
    pub background_amp: f64,
    /// Write trial start/end columns; without them the pipeline splits each
    /// block equally.
    pub trial_windows: bool,
    /// Settings the expectation is computed for.
    pub pipeline: PipelineConfig,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            participant_id: "synth01".into(),
            rate: 1000.0,
            trial_s: 2.0,
            tail_s: 1.0,
            noise_sigma: 0.0,
            background_amp: 0.05,
            trial_windows: true,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub config_path: PathBuf,
    pub config: SessionConfig,
    pub expected: MetricsTable,
    pub excluded_trials: usize,
}

fn windows_per_timed_block(design: &Design, cfg: &PipelineConfig) -> usize {
    let nominal = design.block_duration_s.unwrap_or(SURFACE_BLOCK_SECONDS);
    (nominal / cfg.window_s + 1e-9).floor() as usize
}

/// Random apexes and distances for every trial of a condition. Every
/// `perfect_every`-th trial is a perfect reach.
pub fn random_plan(design: &Design, condition: &str, seed: u64, perfect_every: Option<usize>, cfg: &PipelineConfig) -> Result<SessionPlan, SynthError> {
    let layout = design
        .condition(condition)
        .ok_or_else(|| SynthError::PlanMismatch(format!("unknown condition `{condition}`")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_block = design.trials_per_block.unwrap_or_else(|| windows_per_timed_block(design, cfg));
    let blocks = (0..layout.blocks.len())
        .map(|_| {
            (1..=per_block)
                .map(|k| {
                    let apex_tb = rng.random_range(0.2..2.0);
                    let apex_fcr = rng.random_range(0.2..2.0);
                    let distances = design.trials_per_block.map(|_| {
                        let d_req: f64 = rng.random_range(0.5..3.0);
                        let d_moved = if perfect_every.is_some_and(|n| n > 0 && k % n == 0) {
                            d_req
                        } else {
                            d_req * rng.random_range(0.2..1.8)
                        };
                        (d_req, d_moved)
                    });
                    PlanTrial { apex_tb, apex_fcr, distances }
                })
                .collect()
        })
        .collect();
    Ok(SessionPlan { blocks })
}

/// Writes a fixture directory (channel CSVs, trial CSVs, `session.json` and
/// `expected_metrics.csv`) and returns the oracle's expectation. The seed
/// only drives the noise.
pub fn gen_session(
    design: &Design,
    condition: &str,
    plan: &SessionPlan,
    seed: u64,
    out_dir: &Path,
    opts: &SynthOptions,
) -> Result<SynthSession, SynthError> {
    let layout = design
        .condition(condition)
        .ok_or_else(|| SynthError::PlanMismatch(format!("unknown condition `{condition}`")))?;
    if plan.blocks.len() != layout.blocks.len() {
        return Err(SynthError::PlanMismatch(format!(
            "condition {} has {} blocks, plan has {}",
            layout.name,
            layout.blocks.len(),
            plan.blocks.len()
        )));
    }
    let timed = design.is_timed();
    let per_block = design
        .trials_per_block
        .unwrap_or_else(|| windows_per_timed_block(design, &opts.pipeline));
    for (i, b) in plan.blocks.iter().enumerate() {
        if b.len() != per_block {
            return Err(SynthError::PlanMismatch(format!(
                "block {}: expected {per_block} trials, plan has {}",
                i + 1,
                b.len()
            )));
        }
        for (k, t) in b.iter().enumerate() {
            if !(t.apex_tb.is_finite() && t.apex_fcr.is_finite()) {
                return Err(SynthError::PlanMismatch(format!("block {}, trial {}: non-finite apex", i + 1, k + 1)));
            }
            if !timed && !matches!(t.distances, Some((r, m)) if r > 0.0 && m >= 0.0 && r.is_finite() && m.is_finite()) {
                return Err(SynthError::PlanMismatch(format!(
                    "block {}, trial {}: need d_req > 0 and d_moved >= 0",
                    i + 1,
                    k + 1
                )));
            }
        }
    }

    let period = if timed { opts.pipeline.window_s } else { opts.trial_s };
    let span = per_block as f64 * period;
    let duration = if timed { span.max(design.block_duration_s.unwrap_or(span)) } else { span } + opts.tail_s;

    std::fs::create_dir_all(out_dir).map_err(|source| crate::table::IngestError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut blocks = Vec::with_capacity(plan.blocks.len());
    let mut rows = Vec::new();
    let mut excluded_trials = 0;
    for (i, (label, trials)) in layout.blocks.iter().zip(&plan.blocks).enumerate() {
        let block = i + 1;
        let channel = |muscle: usize| -> Result<Vec<f64>, SynthError> {
            let (freq_hz, phase) = if muscle == 0 { (7.0, 0.0) } else { (11.0, 0.5) };
            let mut components = vec![Component::Sine {
                freq_hz,
                amp: opts.background_amp,
                phase,
            }];
            for (k, t) in trials.iter().enumerate() {
                components.push(Component::Burst {
                    t_center: (k as f64 + 0.5) * period,
                    width: period / 2.0,
                    apex: if muscle == 0 { t.apex_tb } else { t.apex_fcr },
                });
            }
            if opts.noise_sigma > 0.0 {
                components.push(Component::Noise { sigma: opts.noise_sigma });
            }
            let spec = SynthSpec {
                seed,
                stream: 2 * i as u64 + muscle as u64,
                components,
                rate: opts.rate,
                duration,
            };
            Ok(gen_trace(&spec)?.samples)
        };
        let tb = gen_trace_with(channel(0)?, opts.rate, Muscle::Tb)?;
        let fcr = gen_trace_with(channel(1)?, opts.rate, Muscle::Fcr)?;
        let tb_name = format!("b{block}_tb.csv");
        let fcr_name = format!("b{block}_fcr.csv");
        write_emg_csv(&out_dir.join(&tb_name), &tb)?;
        write_emg_csv(&out_dir.join(&fcr_name), &fcr)?;

        let records: Option<Vec<TrialRecord>> = (!timed).then(|| {
            trials
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let (d_req, d_moved) = t.distances.expect("checked above");
                    TrialRecord {
                        block_id: block.to_string(),
                        trial_index: k as u32 + 1,
                        d_req,
                        d_moved,
                        window: opts.trial_windows.then(|| (k as f64 * period, (k + 1) as f64 * period)),
                    }
                })
                .collect()
        });
        let trials_name = records
            .as_ref()
            .map(|r| -> Result<String, SynthError> {
                let name = format!("b{block}_trials.csv");
                write_trials_csv(&out_dir.join(&name), r)?;
                Ok(name)
            })
            .transpose()?;

        let windows = match &records {
            None => OracleWindows::Fixed(opts.pipeline.window_s),
            Some(r) if opts.trial_windows => OracleWindows::Intervals(r.iter().map(|t| t.window.expect("windows on")).collect()),
            Some(r) => OracleWindows::EqualSplit(r.len()),
        };
        let expected = oracle_metrics(&tb.samples, &fcr.samples, opts.rate, 0.0, &windows, records.as_deref(), &opts.pipeline);
        if let Some(r) = &records {
            excluded_trials += r.iter().filter(|t| t.d_moved == t.d_req).count();
        }
        rows.extend(expected.into_iter().map(|o| MetricsRow {
            participant: opts.participant_id.clone(),
            condition: layout.name.clone(),
            block,
            trial: o.trial,
            muscle: o.muscle,
            metrics: o.metrics,
        }));
        blocks.push(BlockConfig {
            label: label.clone(),
            tb_csv: tb_name,
            fcr_csv: fcr_name,
            trials_csv: trials_name,
        });
    }

    let config = SessionConfig {
        participant_id: opts.participant_id.clone(),
        experiment: design.experiment,
        condition: layout.name.clone(),
        blocks,
    };
    let config_path = out_dir.join("session.json");
    crate::table::write_atomic(&config_path, &config.to_json())?;
    let expected = MetricsTable::new(rows);
    write_metrics_csv(&out_dir.join("expected_metrics.csv"), &expected.rows, 1.0)?;
    Ok(SynthSession {
        config_path,
        config,
        expected,
        excluded_trials,
    })
}

fn gen_trace_with(samples: Vec<f64>, rate: f64, muscle: Muscle) -> Result<crate::timeseries::EmgTrace, SynthError> {
    crate::timeseries::EmgTrace::new(samples, rate, muscle, 0.0).map_err(|e| SynthError::InvalidSpec(e.to_string()))
}
