//! Command-line driver for the serfsim models: TOML configuration with unit
//! strings, one subcommand per figure, CSV/JSON/SVG output with a checksummed
//! manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;
pub mod units;

pub use error::CliError;
