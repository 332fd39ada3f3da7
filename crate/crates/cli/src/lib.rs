//! Scenario files and the `tmn` subcommands.

pub mod commands;
pub mod scenario;

pub use commands::{CliError, GlobalOptions};
pub use scenario::{parse_scenario, OutcomeSpec, ScenarioError, ScenarioFile};
