//! Error metrics, runtime accounting and experiment orchestration.

mod error;
mod pipeline;
mod report;

pub use error::{pose_error, PoseError};
pub use pipeline::{instance_inputs, raster_at, run_many, run_pipeline, run_pipelines, LabelerKind, PipelineError, PipelineState};
pub use report::{
    compare, read_summary, CompareError, FrameRecord, Percentiles, RunReport, StageTimes, Summary, TimingSummary,
    Triple,
};
