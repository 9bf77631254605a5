//! Synthetic multi-arm scenarios and the CSV dataset format.

mod csvio;
mod dataset;
mod scenario;

pub use csvio::{read_csv, write_csv, write_csv_to};
pub use dataset::Dataset;
pub use scenario::{assignment_plan, generate, Assignment, OutcomeForm, Scenario, ScenarioKind, ScenarioSpec};
