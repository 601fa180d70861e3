//! Scenario runner for the chbohm two-beam study: reads TOML scenario
//! files, runs the discrete-histories, wavefield, trajectory and detector
//! experiments they list, and writes JSON, CSV and SVG artifacts.

pub mod catalog;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{RunError, ScenarioError};
pub use runner::{check_bundled, run_scenario, RunOptions, RunOutcome};
pub use scenario::Scenario;
