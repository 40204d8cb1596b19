//! Scenario runner, trace writer and requirements report for the `amrt`
//! command.

pub mod assess;
pub mod scenario;

pub use assess::{Approach, AssessmentMatrix, Format, SupportLevel};
pub use scenario::{run_scenario, Overrides, Scenario, ScenarioConfig, Summary, TraceRecord};
