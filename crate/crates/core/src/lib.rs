//! EMG conditioning, muscle-power metrics, work-loop trace analysis and the
//! block-design statistics used to compare force-field switching sessions.
//!
//! Sessions are described by a JSON config pointing at per-block channel
//! CSVs; [`experiment::run_pipeline`] turns a validated session into a
//! [`experiment::MetricsTable`] plus per-block loop traces.

pub mod table;
pub mod timeseries;
pub mod metrics;
pub mod stats;
pub mod looptrace;
pub mod experiment;
pub mod synth;
pub mod cli;
