//! Command-line front end: `validate`, `analyze`, `synth` and `report`.
//!
//! Exit status is 0 on success, 1 when a session breaks its design (or a
//! report needs a control group that is absent) and 2 on I/O or format
//! errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiment::aggregate::{Grouping, Measure, Pairing};
use crate::experiment::{ExperimentId, PipelineConfig};
use crate::metrics::default_class_edges;
use crate::timeseries::{FilterDesign, FilterSpec};

pub use commands::{cmd_analyze, cmd_report, cmd_synth, cmd_validate, AnalyzeSummary};

#[derive(Debug, Parser)]
#[command(name = "neuromech", version, about = "EMG muscle-power and work-loop analysis for switching experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check sessions against their experiment design.
    Validate(ValidateArgs),
    /// Run the pipeline and write every table.
    Analyze(AnalyzeArgs),
    /// Write a synthetic fixture with its expected metrics.
    Synth(SynthArgs),
    /// Condition-level summaries from an existing metrics.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    /// Session config (JSON); repeat for several sessions.
    #[arg(long = "config", required = true)]
    pub configs: Vec<PathBuf>,
    /// Directory the config's CSV paths are relative to (default: the
    /// config's own directory).
    #[arg(long)]
    pub data_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub sessions: SessionArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    ImpulseInvariant,
    Bilinear,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 2)]
    pub filter_order: usize,
    #[arg(long, default_value_t = 40.0)]
    pub cutoff_hz: f64,
    #[arg(long, value_enum, default_value_t = DesignArg::ImpulseInvariant)]
    pub filter_design: DesignArg,
    /// Running-average length in input samples.
    #[arg(long, default_value_t = 50)]
    pub avg_window: usize,
    #[arg(long, default_value_t = 30.0)]
    pub target_rate: f64,
    /// Window length for timed blocks, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_peak_height: f64,
    /// Also compute spikiness per reach trial.
    #[arg(long)]
    pub trial_spikiness: bool,
}

impl PipelineArgs {
    pub fn to_config(&self) -> PipelineConfig {
        let design = match self.filter_design {
            DesignArg::ImpulseInvariant => FilterDesign::ImpulseInvariant,
            DesignArg::Bilinear => FilterDesign::Bilinear,
        };
        PipelineConfig {
            filter: FilterSpec::lowpass(self.cutoff_hz, self.filter_order).with_design(design),
            avg_window: self.avg_window,
            target_rate: self.target_rate,
            window_s: self.window_s,
            min_peak_height: self.min_peak_height,
            trial_spikiness: self.trial_spikiness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    BlockMeans,
    Trials,
}

impl From<PairingArg> for Pairing {
    fn from(p: PairingArg) -> Self {
        match p {
            PairingArg::BlockMeans => Pairing::BlockMeans,
            PairingArg::Trials => Pairing::Trials,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Rp,
    Mpo,
    Ump,
    Spikiness,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Rp => Measure::Rp,
            MeasureArg::Mpo => Measure::Mpo,
            MeasureArg::Ump => Measure::Ump,
            MeasureArg::Spikiness => Measure::Spikiness,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long, value_enum, default_value_t = PairingArg::BlockMeans)]
    pub pairing: PairingArg,
    /// Bonferroni family size (default: number of block pairs per
    /// condition).
    #[arg(long)]
    pub bonferroni_m: Option<usize>,
    /// Measure compared by the t-tests (default: UMP, or RP when no UMP is
    /// available).
    #[arg(long, value_enum)]
    pub measure: Option<MeasureArg>,
    /// Multiply displayed UMP by 0.3048.
    #[arg(long)]
    pub legacy_unit_scale: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub sessions: SessionArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub stats: StatsArgs,
    /// Ascending UMP class edges, comma separated (default 0, 0.5, ..., 15).
    #[arg(long, value_delimiter = ',')]
    pub hist_edges: Option<Vec<f64>>,
}

impl AnalyzeArgs {
    pub fn edges(&self) -> Vec<f64> {
        self.hist_edges.clone().unwrap_or_else(default_class_edges)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_experiment)]
    pub experiment: ExperimentId,
    #[arg(long)]
    pub condition: String,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed for the random apex and distance plan (default: --seed).
    #[arg(long)]
    pub plan_seed: Option<u64>,
    /// Make every N-th trial a perfect reach.
    #[arg(long)]
    pub perfect_every: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value = "synth01")]
    pub participant: String,
    /// Omit trial window columns so blocks are split equally.
    #[arg(long)]
    pub equal_split: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

fn parse_experiment(s: &str) -> Result<ExperimentId, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Trials,
    SubjectMeans,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Trials => Grouping::Trials,
            GroupingArg::SubjectMeans => Grouping::SubjectMeans,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding metrics.csv (and optionally looptrace_table.csv).
    #[arg(long)]
    pub metrics_dir: PathBuf,
    /// Output directory (default: the metrics directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GroupingArg::Trials)]
    pub grouping: GroupingArg,
    /// Also express block means as a percentage of the control condition.
    #[arg(long)]
    pub baseline: bool,
    #[command(flatten)]
    pub stats: StatsArgs,
}

/// Failure of a command, mapped to the exit status.
#[derive(Debug)]
pub enum CliError {
    /// Design violations or a missing control group.
    Validation(String),
    /// Unreadable, missing or malformed input, or unwritable output.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) => m,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Analyze(a) => cmd_analyze(&a).map(|s| println!("{s}")),
        Command::Synth(a) => cmd_synth(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

/// Parses the process arguments, runs the command and reports errors on
/// standard error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
