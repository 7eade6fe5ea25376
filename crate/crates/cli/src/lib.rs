//! Experiment runner for the `qamcs` toolkit: configuration, the pipeline
//! stages behind each subcommand, and CSV reports.

// `!(x >= 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use commands::main_with_args;
pub use config::{ExperimentConfig, Method, SamplingKind};
pub use error::CliError;
pub use experiment::{compare_methods, CompareOutcome};
pub use report::{export_report, parse_report, ReportRow};
