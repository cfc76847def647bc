//! Command-line front end for `radshoot`: TOML run configurations, the
//! seven subcommands, and their JSON, CSV and text outputs.

pub mod config;
pub mod error;
pub mod run;

pub use config::{load_config, parse_config, Format, RunConfig};
pub use error::CliError;
pub use run::{run, Command, RunOutcome};
