//! File formats, experiment configuration, parallel execution and report
//! rendering around `icewatch-core`. The `icewatch` binary is a thin layer
//! over this library.

pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod report;
pub mod timestamp;

pub use error::CliError;
