//! Command-line harness for the angloc pipeline: scene simulation, trace
//! ingestion, radio-map building, tuning, localization, evaluation and
//! Monte Carlo studies.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod output;
pub mod simulate;
pub mod study;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult, ExitKind};
