//! Config-driven experiment runner for `erm-core`.

pub mod config;
pub mod run;

pub use config::{Command, Diagnostic, ExperimentConfig, KernelSpec, ModelSpec};
pub use run::{run, write_results, Record, ResultManifest, RunError, RunOptions, Tolerance};
