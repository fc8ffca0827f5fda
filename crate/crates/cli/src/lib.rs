//! Configuration-driven pipeline around `bikecast-core`: CSV ingestion,
//! context masks, training, evaluation and reporting.

pub mod config;
pub mod context;
pub mod csvio;
pub mod error;
pub mod ingest;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use pipeline::{Command, Pipeline};
