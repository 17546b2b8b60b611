//! Driver for `bbm-core`: JSON configuration, scenario presets for every
//! example family, a scenario runner with per-check isolation, report and
//! time-series emission, and the acceptance criteria.

pub mod config;
pub mod criteria;
pub mod report;
pub mod run;
pub mod scenario;

pub use config::{load_config, SimConfig};
pub use report::{emit_report, Check, Report, Rule};
pub use run::{run_scenario, Outcome, Stages};
pub use scenario::Scenario;
