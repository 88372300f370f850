//! Pipeline driver behind the `evsv` binary: configuration, feature
//! caching, stage orchestration, reports and run records.

pub mod commands;
pub mod config;
pub mod features;
pub mod pipeline;
pub mod record;
pub mod report;

pub use config::ExperimentConfig;
pub use pipeline::Workspace;
