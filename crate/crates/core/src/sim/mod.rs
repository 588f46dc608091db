//! Event loop, scenarios, reports and the interactive session.

pub mod baud_table;
pub mod engine;
pub mod experiment;
pub mod queue;
pub mod repl;
pub mod report;
pub mod scenario;

pub use engine::{run, run_with, RunOptions, SimConfig, SimError, Simulation};
pub use report::{accuracy, RunReport};
pub use scenario::{parse_scenario, Scenario, ScenarioError};
