//! Batch front-end: a [`RunManifest`] describes a run, each `cmd_*`
//! function turns it into output files.

pub mod args;
pub mod commands;
mod error;
pub mod manifest;

pub use commands::{cmd_machine, cmd_mine_gates, cmd_minimize, cmd_simulate, cmd_sweep, Outputs};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
