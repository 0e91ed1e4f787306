//! Command-line front end: configuration, PNG sequence I/O and the
//! `synth`, `matte`, `restore-bg` and `eval` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::Config;
pub use error::{CliError, Result};
