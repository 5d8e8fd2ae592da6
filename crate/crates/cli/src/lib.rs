//! Command-line front end: scenario files, trace and controls files, the
//! benchmark harness and the subcommands.

pub mod bench;
pub mod commands;
mod error;
pub mod files;
pub mod scenario;

pub use commands::{run, Cli};
pub use error::CliError;
