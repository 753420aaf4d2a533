//! Command-line driver: run configurations, subcommands and output files.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;

pub use cli::{run, Cli};
pub use config::RunConfig;
pub use error::{CliError, Result};
