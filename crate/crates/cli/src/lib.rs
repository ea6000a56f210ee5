//! Configuration, presets and file output for the `tubeot` command.

pub mod config;
pub mod error;
pub mod presets;
pub mod run;

pub use config::{parse_config, parse_with_overrides, RunConfig, RunPlan};
pub use error::CliError;
pub use run::{run, run_plan, OutputBundle};
