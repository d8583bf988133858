//! Mission requests and symbolic plans.
//!
//! A plan is an ordered list of typed actions. Each action names the robot
//! that performs it, its geometric parameters ("where and how long"), the
//! inspection queries it carries ("what to look for") and the ids of the
//! steps that must finish before it may start.

mod parse;
mod request;
mod score;
mod validate;

pub use parse::{parse_plan, ParseError, ParseErrorKind};
pub use request::{EnvDescription, Knowledge, MissionRequest, NamedPolygon, RequestError};
pub use score::{round_half_up, score_plan, step_labels, PlanScore, ScoreError, ScoringRubric};
pub use validate::{validate_plan, ValidationReport, Violation};

use crate::geometry::Point;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Landmark resolved at run time to the USV's current deck position.
pub const USV_DECK: &str = "USVDeck";
/// Landmark resolved at run time to a point above the USV.
pub const HOVER_ABOVE_USV: &str = "HoverPointAboveUSV";
/// Home berth used by `Dock` and `GoHome` when no target is given.
pub const PORT_DOCK: &str = "PortDock";

pub type StepId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Robot {
    #[serde(rename = "USV")]
    Usv,
    #[serde(rename = "UAV")]
    Uav,
}

impl Robot {
    pub const ALL: [Robot; 2] = [Robot::Usv, Robot::Uav];

    pub fn name(self) -> &'static str {
        match self {
            Robot::Usv => "USV",
            Robot::Uav => "UAV",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "USV" => Some(Robot::Usv),
            "UAV" => Some(Robot::Uav),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Robot::Usv => 0,
            Robot::Uav => 1,
        }
    }
}

impl fmt::Display for Robot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The closed action space shared by both vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Takeoff,
    FlyTo,
    Survey,
    Record,
    Hover,
    Navigate,
    Dock,
    LandOnUSV,
    Inspect,
    Report,
    GoHome,
}

impl ActionKind {
    pub const ALL: [ActionKind; 11] = [
        ActionKind::Takeoff,
        ActionKind::FlyTo,
        ActionKind::Survey,
        ActionKind::Record,
        ActionKind::Hover,
        ActionKind::Navigate,
        ActionKind::Dock,
        ActionKind::LandOnUSV,
        ActionKind::Inspect,
        ActionKind::Report,
        ActionKind::GoHome,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Takeoff => "Takeoff",
            ActionKind::FlyTo => "FlyTo",
            ActionKind::Survey => "Survey",
            ActionKind::Record => "Record",
            ActionKind::Hover => "Hover",
            ActionKind::Navigate => "Navigate",
            ActionKind::Dock => "Dock",
            ActionKind::LandOnUSV => "LandOnUSV",
            ActionKind::Inspect => "Inspect",
            ActionKind::Report => "Report",
            ActionKind::GoHome => "GoHome",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// The only robot allowed to perform this action, if it is platform-specific.
    pub fn required_robot(self) -> Option<Robot> {
        match self {
            ActionKind::Takeoff | ActionKind::FlyTo | ActionKind::LandOnUSV => Some(Robot::Uav),
            ActionKind::Navigate | ActionKind::Dock | ActionKind::GoHome => Some(Robot::Usv),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A target given either by landmark name or by workspace coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Named(String),
    Coords(Point),
}

impl Target {
    pub fn named(name: &str) -> Self {
        Target::Named(name.to_string())
    }

    pub fn at(x: f64, y: f64) -> Self {
        Target::Coords(Point::new(x, y))
    }

    pub fn is_named(&self, name: &str) -> bool {
        matches!(self, Target::Named(n) if n == name)
    }
}

/// Geometric and temporal parameters of an action, keyed by pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", try_from = "RawTheta")]
pub enum ThetaParams {
    Point {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Target>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        altitude: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dwell: Option<f64>,
    },
    Orbit360 {
        center: Target,
        radius: f64,
        altitude: f64,
    },
    Rectangle {
        vertices: [Point; 4],
        altitude: f64,
    },
}

impl Default for ThetaParams {
    fn default() -> Self {
        ThetaParams::Point { target: None, altitude: None, dwell: None }
    }
}

impl ThetaParams {
    pub fn point(target: Option<Target>, altitude: Option<f64>) -> Self {
        ThetaParams::Point { target, altitude, dwell: None }
    }

    pub fn with_dwell(seconds: f64) -> Self {
        ThetaParams::Point { target: None, altitude: None, dwell: Some(seconds) }
    }

    pub fn dwell(&self) -> Option<f64> {
        match self {
            ThetaParams::Point { dwell, .. } => *dwell,
            _ => None,
        }
    }

    pub fn altitude(&self) -> Option<f64> {
        match self {
            ThetaParams::Point { altitude, .. } => *altitude,
            ThetaParams::Orbit360 { altitude, .. } | ThetaParams::Rectangle { altitude, .. } => Some(*altitude),
        }
    }

    pub fn target(&self) -> Option<&Target> {
        match self {
            ThetaParams::Point { target, .. } => target.as_ref(),
            ThetaParams::Orbit360 { center, .. } => Some(center),
            ThetaParams::Rectangle { .. } => None,
        }
    }

    pub fn pattern_name(&self) -> &'static str {
        match self {
            ThetaParams::Point { .. } => "Point",
            ThetaParams::Orbit360 { .. } => "Orbit360",
            ThetaParams::Rectangle { .. } => "Rectangle",
        }
    }
}

/// Loose wire form of [`ThetaParams`]; every field optional so errors can be precise.
#[derive(Debug, Clone, Default, Deserialize)]
pub(crate) struct RawTheta {
    pattern: Option<String>,
    target: Option<Target>,
    center: Option<Target>,
    altitude: Option<f64>,
    radius: Option<f64>,
    vertices: Option<Vec<Point>>,
    dwell: Option<f64>,
}

impl TryFrom<RawTheta> for ThetaParams {
    type Error = String;

    fn try_from(raw: RawTheta) -> Result<Self, Self::Error> {
        if let Some(d) = raw.dwell {
            if !(d >= 0.0) {
                return Err(format!("dwell must be non-negative, got {d}"));
            }
        }
        match raw.pattern.as_deref().unwrap_or("Point") {
            "Point" => Ok(ThetaParams::Point { target: raw.target, altitude: raw.altitude, dwell: raw.dwell }),
            "Orbit360" => {
                let center = raw
                    .center
                    .or(raw.target)
                    .ok_or_else(|| "Orbit360 requires a center".to_string())?;
                let radius = raw.radius.ok_or_else(|| "Orbit360 requires a radius".to_string())?;
                if !(radius > 0.0) {
                    return Err(format!("Orbit360 radius must be positive, got {radius}"));
                }
                let altitude = raw.altitude.ok_or_else(|| "Orbit360 requires an altitude".to_string())?;
                Ok(ThetaParams::Orbit360 { center, radius, altitude })
            }
            "Rectangle" => {
                let vertices = raw.vertices.ok_or_else(|| "Rectangle requires vertices".to_string())?;
                let vertices: [Point; 4] = vertices
                    .try_into()
                    .map_err(|v: Vec<Point>| format!("Rectangle requires exactly 4 vertices, got {}", v.len()))?;
                let altitude = raw.altitude.ok_or_else(|| "Rectangle requires an altitude".to_string())?;
                Ok(ThetaParams::Rectangle { vertices, altitude })
            }
            other => Err(format!("unknown pattern {other:?}")),
        }
    }
}

/// One plan step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicAction {
    pub id: StepId,
    pub action: ActionKind,
    pub robot: Robot,
    #[serde(rename = "params")]
    pub theta: ThetaParams,
    #[serde(rename = "queries")]
    pub sigma: Vec<String>,
    pub preconditions: BTreeSet<StepId>,
}

impl SymbolicAction {
    pub fn new(id: StepId, action: ActionKind, robot: Robot) -> Self {
        Self {
            id,
            action,
            robot,
            theta: ThetaParams::default(),
            sigma: Vec::new(),
            preconditions: BTreeSet::new(),
        }
    }

    pub fn with_theta(mut self, theta: ThetaParams) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_queries<I, S>(mut self, queries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.sigma = queries.into_iter().map(Into::into).collect();
        self
    }

    pub fn after<I: IntoIterator<Item = StepId>>(mut self, ids: I) -> Self {
        self.preconditions = ids.into_iter().collect();
        self
    }

    /// Short label such as `UAV Takeoff`.
    pub fn describe(&self) -> String {
        format!("{} {}", self.robot, self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub mission_id: String,
    pub steps: Vec<SymbolicAction>,
}

impl MissionPlan {
    pub fn new(mission_id: impl Into<String>, steps: Vec<SymbolicAction>) -> Self {
        Self { mission_id: mission_id.into(), steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, id: StepId) -> Option<&SymbolicAction> {
        self.steps.get(id)
    }

    /// Serialize to the plan document format accepted by [`parse_plan`].
    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization is infallible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_names_round_trip() {
        for kind in ActionKind::ALL {
            assert_eq!(ActionKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(ActionKind::from_name("Teleport"), None);
        assert_eq!(ActionKind::from_name("takeoff"), None);
    }

    #[test]
    fn platform_specific_actions() {
        assert_eq!(ActionKind::LandOnUSV.required_robot(), Some(Robot::Uav));
        assert_eq!(ActionKind::GoHome.required_robot(), Some(Robot::Usv));
        assert_eq!(ActionKind::Inspect.required_robot(), None);
    }

    #[test]
    fn theta_rejects_bad_patterns() {
        let bad_radius: Result<ThetaParams, _> =
            serde_json::from_str(r#"{"pattern":"Orbit360","center":"Crane","radius":0,"altitude":15}"#);
        assert!(bad_radius.is_err());
        let three: Result<ThetaParams, _> =
            serde_json::from_str(r#"{"pattern":"Rectangle","vertices":[[0,0],[1,0],[1,1]],"altitude":15}"#);
        assert!(three.unwrap_err().to_string().contains("exactly 4"));
        let implicit: ThetaParams = serde_json::from_str(r#"{"target":[3.0,4.0]}"#).unwrap();
        assert_eq!(implicit, ThetaParams::point(Some(Target::at(3.0, 4.0)), None));
    }
}
