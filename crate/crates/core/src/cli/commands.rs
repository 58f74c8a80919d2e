use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{AnalyzeArgs, CliError, ReportArgs, SessionArgs, StatsArgs, SynthArgs, ValidateArgs};
use crate::experiment::aggregate::{
    baseline_text, block_means, block_means_text, block_ttests, condition_correlations, correlations_text, default_measure,
    histogram_text, loop_table, percent_of_baseline, pooled_loops, ttests_text, ump_histograms, AggregateError, Measure,
};
use crate::experiment::{load_session, run_pipeline, validate_design, Design, PipelineError, PipelineOutput, Session};
use crate::looptrace::{loop_table_text, points_csv_text, read_loop_table};
use crate::metrics::io::{metrics_csv_text, read_metrics_csv, MetricsRow};
use crate::metrics::LEGACY_UNIT_SCALE;
use crate::synth::{gen_session, random_plan, SynthError, SynthOptions};
use crate::table::{write_atomic, IngestError};

fn io(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn load_all(args: &SessionArgs) -> Result<Vec<Session>, CliError> {
    args.configs
        .par_iter()
        .map(|c| load_session(c, args.data_root.as_deref()).map_err(io))
        .collect()
}

/// Violations of every session, prefixed by its config path.
fn violations(args: &SessionArgs, sessions: &[Session]) -> Vec<String> {
    let mut out = Vec::new();
    for (path, s) in args.configs.iter().zip(sessions) {
        let report = validate_design(s, &Design::for_experiment(s.experiment));
        for v in &report.violations {
            out.push(format!("{}: {v}", path.display()));
        }
    }
    out
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let sessions = load_all(&args.sessions)?;
    let problems = violations(&args.sessions, &sessions);
    if problems.is_empty() {
        for path in &args.sessions.configs {
            println!("{}: ok", path.display());
        }
        return Ok(());
    }
    for p in &problems {
        println!("{p}");
    }
    Err(CliError::Validation(format!("{} design violation(s)", problems.len())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSummary {
    pub sessions: usize,
    pub rows: usize,
    pub excluded_trials: usize,
    pub warnings: usize,
    pub out: PathBuf,
}

impl fmt::Display for AnalyzeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} session(s), {} metric rows, {} trial(s) excluded for undefined UMP, {} warning(s); tables in {}",
            self.sessions,
            self.rows,
            self.excluded_trials,
            self.warnings,
            self.out.display()
        )
    }
}

/// Writes every `(relative path, contents)` pair under `dir`. On the first
/// failure the files already written are removed again.
fn write_outputs(dir: &Path, files: &[(PathBuf, String)]) -> Result<(), CliError> {
    let mut written: Vec<PathBuf> = Vec::new();
    for (rel, text) in files {
        let path = dir.join(rel);
        if let Err(e) = write_atomic(&path, text) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let mut tmp = path.into_os_string();
            tmp.push(".tmp");
            let _ = std::fs::remove_file(tmp);
            return Err(io(e));
        }
        written.push(path);
    }
    Ok(())
}

fn stats_measure(stats: &StatsArgs, rows: &[MetricsRow]) -> Measure {
    stats.measure.map(Measure::from).unwrap_or_else(|| default_measure(rows))
}

fn scaled(rows: &[MetricsRow], scale: f64) -> Vec<MetricsRow> {
    rows.iter()
        .cloned()
        .map(|mut r| {
            r.metrics.ump = r.metrics.ump.map(|u| u * scale);
            r
        })
        .collect()
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalyzeSummary, CliError> {
    let edges = args.edges();
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Io("--hist-edges needs at least two ascending values".into()));
    }
    let sessions = load_all(&args.sessions)?;
    let problems = violations(&args.sessions, &sessions);
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("{p}");
        }
        return Err(CliError::Validation(format!(
            "{} design violation(s); nothing written",
            problems.len()
        )));
    }

    let cfg = args.pipeline.to_config();
    let outputs = sessions
        .par_iter()
        .map(|s| run_pipeline(s, &Design::for_experiment(s.experiment), &cfg))
        .collect::<Result<Vec<_>, PipelineError>>()
        .map_err(io)?;
    let out = PipelineOutput::merge(outputs);
    for issue in &out.issues {
        eprintln!("warning: {issue}");
    }

    let scale = if args.stats.legacy_unit_scale { LEGACY_UNIT_SCALE } else { 1.0 };
    let rows = &out.metrics.rows;
    let display_rows = scaled(rows, scale);
    let measure = stats_measure(&args.stats, rows);
    let histograms = ump_histograms(rows, &edges, scale).map_err(io)?;
    let table = loop_table(&out.loops);
    let tests = block_ttests(&display_rows, measure, args.stats.pairing.into(), args.stats.bonferroni_m);

    let mut files = vec![
        (PathBuf::from("metrics.csv"), metrics_csv_text(rows, scale)),
        (PathBuf::from("ump_histogram.csv"), histogram_text(&histograms)),
        (PathBuf::from("looptrace_table.csv"), loop_table_text(&table)),
        (PathBuf::from("ttests.csv"), ttests_text(&tests)),
        (PathBuf::from("correlations.csv"), correlations_text(&condition_correlations(&table))),
    ];
    for (condition, block, lt) in pooled_loops(&out.loops) {
        files.push((
            Path::new("looptrace_points").join(format!("{condition}_block{block}.csv")),
            points_csv_text(&lt),
        ));
    }
    write_outputs(&args.out, &files)?;
    Ok(AnalyzeSummary {
        sessions: sessions.len(),
        rows: rows.len(),
        excluded_trials: out.excluded_trials,
        warnings: out.issues.len(),
        out: args.out.clone(),
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let design = Design::for_experiment(args.experiment);
    let cfg = args.pipeline.to_config();
    let synth_err = |e: SynthError| match e {
        SynthError::Io(e) => io(e),
        other => CliError::Validation(other.to_string()),
    };
    let plan = random_plan(&design, &args.condition, args.plan_seed.unwrap_or(args.seed), args.perfect_every, &cfg)
        .map_err(synth_err)?;
    let opts = SynthOptions {
        participant_id: args.participant.clone(),
        noise_sigma: args.noise_sigma,
        trial_windows: !args.equal_split,
        pipeline: cfg,
        ..SynthOptions::default()
    };
    let s = gen_session(&design, &args.condition, &plan, args.seed, &args.out, &opts).map_err(synth_err)?;
    println!(
        "wrote {} ({} expected rows, {} perfect trial(s))",
        s.config_path.display(),
        s.expected.len(),
        s.excluded_trials
    );
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let rows = read_metrics_csv(&args.metrics_dir.join("metrics.csv")).map_err(io)?;
    let scale = if args.stats.legacy_unit_scale { LEGACY_UNIT_SCALE } else { 1.0 };
    let rows = scaled(&rows, scale);
    let measure = stats_measure(&args.stats, &rows);
    let means = block_means(&rows, measure, args.grouping.into());
    let mut files = vec![(PathBuf::from("block_means.csv"), block_means_text(&means))];
    if args.baseline {
        let pct = percent_of_baseline(&means).map_err(|e| match e {
            AggregateError::MissingControlCondition => CliError::Validation(e.to_string()),
            other => io(other),
        })?;
        files.push((PathBuf::from("baseline_percent.csv"), baseline_text(&pct)));
    }
    let tests = block_ttests(&rows, measure, args.stats.pairing.into(), args.stats.bonferroni_m);
    files.push((PathBuf::from("ttests.csv"), ttests_text(&tests)));
    let table_path = args.metrics_dir.join("looptrace_table.csv");
    if table_path.is_file() {
        let table = read_loop_table(&table_path).map_err(|e: IngestError| io(e))?;
        files.push((PathBuf::from("correlations.csv"), correlations_text(&condition_correlations(&table))));
    }
    let out = args.out.clone().unwrap_or_else(|| args.metrics_dir.clone());
    write_outputs(&out, &files)?;
    for (name, _) in &files {
        println!("{}", out.join(name).display());
    }
    Ok(())
}
