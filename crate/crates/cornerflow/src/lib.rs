//! Command-line front end: configuration, shape catalog, runs and CSV output.

pub mod config;
pub mod run;
pub mod shapes;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{run, RunError};
