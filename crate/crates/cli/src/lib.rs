//! Experiment harness for general vector machines: declarative configs,
//! control-parameter sweeps, and the fit / classify / wash / eval workflows.

pub mod commands;
pub mod config;
mod error;
pub mod experiment;

pub use error::{exit, CliError, CliResult};
