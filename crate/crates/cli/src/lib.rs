//! Orchestration for the `sichan` command: configuration files, pipeline
//! stages and run manifests.

pub mod config;
pub mod pipeline;

pub use config::{CancelConfig, CancelMode, ChannelRef, EstimatorConfig, Method, PipelineConfig};
pub use pipeline::{export_plot_data, run_pipeline, Layout, Manifest, PipelineOutcome, Seeds, StageError};
