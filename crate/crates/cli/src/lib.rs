//! Command-line harness: settings, model files, evaluation drivers and CSV output.

pub mod commands;
pub mod error;
pub mod eval;
pub mod model;
pub mod output;
pub mod settings;

pub use error::{CliError, CliResult};
