//! Config-driven scenario runner for the `degenlab` numerics.

pub mod commands;
pub mod config;
pub mod scenario;

pub use commands::{execute, Cli, CliError};
pub use config::ScenarioConfig;
pub use scenario::{run_scenario, RunReport};
