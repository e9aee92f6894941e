//! Config-driven experiment runner for gap-spectrum sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{validate_config, ConfigErrors, ExperimentConfig, Issue, Task};
pub use run::{run_experiment, RunError, RunOptions, SWEEP_HEADER};
