//! Batch front end: reads a JSON run configuration, runs one subcommand and writes its
//! tables as CSV and JSON.
//!
//! Exit status: 0 on success, 2 when a verification threshold fails or an incompatible
//! load is given to the with-compat expansion, 1 on any error.

pub mod commands;
pub mod config;

pub use commands::{run, CliError, Command, Outcome};
pub use config::{load, ConfigError, Resolved, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_UNVERIFIED: u8 = 2;
