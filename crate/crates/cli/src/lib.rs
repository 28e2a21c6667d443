//! Command-line front end: layered configuration, subcommand execution and
//! artifact emission.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, PartialConfig, Resolved, RunConfig, Violation};
pub use run::{execute, CliError, Command};
