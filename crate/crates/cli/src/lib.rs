//! Command-line front end: synthetic data, training, evaluation, inference,
//! the frame pipeline, cost reports, latency benchmarks and the
//! architecture sweep.

pub mod bench;
pub mod commands;
pub mod config;
pub mod manifest;
pub mod sweep;

pub use commands::{exit_code, run, Cli, UsageError};
