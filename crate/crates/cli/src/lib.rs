//! Command-line front end: circuit files, protocol drivers and JSON reports.

pub mod commands;
pub mod grammar;

pub use commands::{run, Cli, CliError, Command, SCHEMA_VERSION};
pub use grammar::{parse_circuit, render, ParseError};
