//! Configuration, experiment orchestration and the acceptance suite behind
//! the `monosde` binary.

pub mod config;
pub mod run;
pub mod verify;

pub use config::{emit_config, parse_config, ConfigError, Experiment, ExperimentConfig};
pub use run::{run, write_artifacts, Artifact, RunError, RunOutput};
pub use verify::{run_criteria, Outcome};
