//! Scenario files, run orchestration and data output for the `abphase` tool.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_scenario, ConfigError, ScenarioConfig};
