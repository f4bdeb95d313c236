//! Library half of the `tonewalk` command: configuration, file formats,
//! manifests and the commands themselves.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod samples;

pub use error::{exit, CliError, Result};
