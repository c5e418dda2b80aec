//! TOML scenario files.

use std::path::Path;

use roadplan_core::bezier::CornerSpec;
use roadplan_core::lateral_planner::PlannerConfig;
use roadplan_core::sim::{AccConfig, ObstacleSpec, Scenario, SimConfig, VehicleConfig, WaypointSection};
use roadplan_core::stanley::StanleySchedule;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk layout: the scenario sections plus a mandatory schema version.
/// Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub waypoints: WaypointSection,
    #[serde(default)]
    pub corners: Vec<CornerSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub acc: AccConfig,
    #[serde(default)]
    pub stanley: StanleySchedule,
    #[serde(default)]
    pub sim: SimConfig,
}

impl From<ScenarioFile> for Scenario {
    fn from(f: ScenarioFile) -> Self {
        Scenario {
            waypoints: f.waypoints,
            corners: f.corners,
            obstacles: f.obstacles,
            vehicle: f.vehicle,
            planner: f.planner,
            acc: f.acc,
            stanley: f.stanley,
            sim: f.sim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported schema_version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersion { found: u32 },
    #[error("cannot read scenario: {0}")]
    Io(String),
}

impl ParseError {
    /// One-based line and column, when the error points into the file.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ParseError::Syntax { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_scenario(src: &str) -> Result<Scenario, ParseError> {
    let file: ScenarioFile = toml::from_str(src).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(src, s.start));
        ParseError::Syntax {
            line,
            column,
            message: e.message().trim_end().to_string(),
        }
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ParseError::SchemaVersion { found: file.schema_version });
    }
    Ok(file.into())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ParseError> {
    let src = std::fs::read_to_string(path).map_err(|e| ParseError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&src)
}
