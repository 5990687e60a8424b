//! Pipeline CLI library: file formats, configuration, synthetic data and the
//! subcommand implementations. The binary in `main.rs` is a thin dispatcher.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod synth;

pub use error::{CliError, Result};
