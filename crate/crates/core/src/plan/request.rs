use super::ActionKind;
use crate::geometry::{Bounds, Point, Polygon};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequestError {
    #[error("mission instruction is empty")]
    EmptyInstruction,
    #[error("polygon {0:?} has fewer than 3 vertices")]
    DegeneratePolygon(String),
    #[error("polygon {0:?} has a vertex outside the workspace bounds")]
    PolygonOutOfBounds(String),
    #[error("max altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
}

/// Text summary plus the geometric facts the planner is told about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDescription {
    #[serde(default)]
    pub summary: String,
    pub bounds: Bounds,
    #[serde(default)]
    pub landmarks: BTreeMap<String, Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPolygon {
    pub name: String,
    pub polygon: Polygon,
}

/// Operational knowledge: navigation restrictions plus free-text rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knowledge {
    #[serde(default)]
    pub no_fly_zones: Vec<NamedPolygon>,
    pub max_altitude: f64,
    #[serde(default)]
    pub usv_restricted: Vec<NamedPolygon>,
    #[serde(default)]
    pub rules: Vec<String>,
}

impl Default for Knowledge {
    fn default() -> Self {
        Self { no_fly_zones: vec![], max_altitude: 30.0, usv_restricted: vec![], rules: vec![] }
    }
}

impl Knowledge {
    /// Render every constraint as one line of text for prompt assembly.
    pub fn constraint_lines(&self) -> Vec<String> {
        let fmt_poly = |p: &Polygon| {
            p.vertices
                .iter()
                .map(|v| format!("({:.1}, {:.1})", v.x, v.y))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut lines = vec![format!("Maximum UAV altitude: {:.1} m", self.max_altitude)];
        for z in &self.no_fly_zones {
            lines.push(format!("No-fly zone {}: polygon [{}]", z.name, fmt_poly(&z.polygon)));
        }
        for z in &self.usv_restricted {
            lines.push(format!("USV-restricted area {}: polygon [{}]", z.name, fmt_poly(&z.polygon)));
        }
        lines.extend(self.rules.iter().cloned());
        lines
    }
}

fn all_actions() -> BTreeSet<ActionKind> {
    ActionKind::ALL.into_iter().collect()
}

/// The mission tuple handed to a planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionRequest {
    pub instruction: String,
    pub environment: EnvDescription,
    pub knowledge: Knowledge,
    #[serde(default = "all_actions")]
    pub allowed_actions: BTreeSet<ActionKind>,
}

impl MissionRequest {
    pub fn new(instruction: impl Into<String>, environment: EnvDescription, knowledge: Knowledge) -> Self {
        Self {
            instruction: instruction.into(),
            environment,
            knowledge,
            allowed_actions: all_actions(),
        }
    }

    pub fn validate(&self) -> Result<(), RequestError> {
        if self.instruction.trim().is_empty() {
            return Err(RequestError::EmptyInstruction);
        }
        if !(self.knowledge.max_altitude > 0.0) {
            return Err(RequestError::NonPositiveAltitude(self.knowledge.max_altitude));
        }
        let bounds = &self.environment.bounds;
        for zone in self.knowledge.no_fly_zones.iter().chain(&self.knowledge.usv_restricted) {
            if zone.polygon.vertices.len() < 3 {
                return Err(RequestError::DegeneratePolygon(zone.name.clone()));
            }
            if !zone.polygon.vertices.iter().all(|v| bounds.contains_xy(v)) {
                return Err(RequestError::PolygonOutOfBounds(zone.name.clone()));
            }
        }
        Ok(())
    }

    pub fn landmark(&self, name: &str) -> Option<Point> {
        self.environment.landmarks.get(name).copied()
    }
}
