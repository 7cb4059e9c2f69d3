//! Config-driven experiment runner over `plaplab-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod manifest;
pub mod plot;
pub mod run;

pub use config::{ExperimentConfig, Violation};
pub use manifest::RunManifest;
pub use run::{emit_outputs, run_experiment, Format, RunError, Verb};
