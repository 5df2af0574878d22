//! File formats, configuration and experiment drivers around `spacemap-core`.
//!
//! The `spacemap` binary is a thin clap front end over [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
