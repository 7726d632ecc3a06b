//! Configuration files, output formats and subcommands of the `chns-ieq` tool.

pub mod config;
pub mod driver;
pub mod error;
pub mod history;
pub mod vtk;

pub use error::CliError;
