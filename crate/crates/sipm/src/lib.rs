//! Command-line front end for `sipm-core`: a rayon executor, CSV and JSON
//! file formats with embedded run configurations, ASCII rendering of single
//! runs, and the `sipm` subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod grids;
pub mod io;
pub mod render;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
pub use exec::Parallel;
