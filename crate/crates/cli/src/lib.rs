//! Command-line front end: panel ingestion, estimation, simulation and rate runs.

pub mod commands;
pub mod error;
pub mod io;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
