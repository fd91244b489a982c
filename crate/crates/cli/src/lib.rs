//! Declarative experiment runner for the `ldfa-core` engine.

// NaN must fail range checks, so `!(x >= 0.0)` is the intended form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod runner;

pub use config::{parse_config, parse_str, ExperimentConfig};
pub use error::{exit, CliError};
pub use runner::{run, RunManifest, RunOptions};
