//! Scenario files, multi-seed experiment runs and metric summaries for the
//! `flowplan` planner.
pub mod cli;
pub mod run;
pub mod scenario;
pub mod summary;

pub use run::{plan_once, read_metrics, run_scenario, MetricsRecord, RunOptions, RunOutcome};
pub use scenario::{Arm, Scenario, ScenarioError};
pub use summary::{summarize, Summary};
