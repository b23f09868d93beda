//! Command-line front end for the KWC grain-boundary solver.

pub mod commands;
pub mod config;

pub use commands::{dispatch, Cli, CliError};
