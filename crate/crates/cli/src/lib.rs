//! File formats, run manifests and command implementations behind the `ispls` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{execute, replay};
pub use config::{parse_run, RunConfig, RunManifest};
pub use error::{CliError, CliResult};
