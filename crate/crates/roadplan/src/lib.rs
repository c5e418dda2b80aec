//! Scenario files, CSV artifacts and the command implementations behind the
//! `roadplan` binary.

pub mod commands;
pub mod format;
pub mod scenario;

pub use commands::{cmd_plan, cmd_simulate, cmd_smooth, report_path, CommandError, PlanSummary};
pub use format::fmt_g;
pub use scenario::{load_scenario, parse_scenario, ParseError, ScenarioFile, SCHEMA_VERSION};
