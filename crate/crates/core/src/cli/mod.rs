//! Command-line front end: configuration, subcommands and the run manifest.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, execute_with_threads, COMMANDS, PIPELINE_ARTIFACTS};
pub use config::{ConfigArgs, RunConfig};
pub use output::{ArtifactEntry, Manifest, Outputs, StageRecord, StageStatus, MANIFEST_FILE};
