//! File formats, parallel drivers and the `boole` command line on top of
//! `boole-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;

pub use error::{CliError, CliResult};
