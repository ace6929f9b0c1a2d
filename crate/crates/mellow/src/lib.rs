//! File formats, parallel experiment drivers and the command-line front end
//! for `mellow-core`.
//!
//! The binary is a thin wrapper over [`cli::main_with_args`]; the drivers in
//! [`experiments`] are public so the acceptance suite and other tools can run
//! the same experiments without going through the command line.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod formats;

pub use error::{CliError, CliResult};
