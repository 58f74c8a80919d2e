//! Experiment designs, session loading and validation, and the end-to-end
//! pipeline from raw channel CSVs to metric and loop tables.

pub mod aggregate;
mod design;
mod pipeline;
mod session;

pub use design::{
    ConditionLayout, Design, ExperimentId, Factor, BLOCK_DURATION_TOLERANCE_S, SURFACE_BLOCK_SECONDS, TRIALS_PER_BLOCK,
};
pub use pipeline::{
    condition_channel, run_pipeline, BlockLoop, MetricsTable, PipelineConfig, PipelineError, PipelineIssue,
    PipelineOutput,
};
pub use session::{
    load_session, validate_design, BlockConfig, BlockData, Session, SessionConfig, ValidationReport, Violation,
    ViolationKind,
};
