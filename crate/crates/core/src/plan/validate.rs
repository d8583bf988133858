use super::{
    ActionKind, MissionPlan, MissionRequest, Robot, StepId, SymbolicAction, Target, ThetaParams, HOVER_ABOVE_USV,
    USV_DECK,
};
use crate::geometry::{circle_points, Point};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Samples per orbit when checking an `Orbit360` pattern.
const ORBIT_SAMPLES: usize = 36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    AltitudeExceeded { step: StepId, altitude: f64, max: f64 },
    NoFlyZone { step: StepId, zone: String, point: Point },
    UsvRestricted { step: StepId, zone: String, point: Point },
    OutOfBounds { step: StepId, point: Point },
    UnknownLandmark { step: StepId, name: String },
    MissingCarrierPositioning { step: StepId },
    ActionNotAllowed { step: StepId, action: ActionKind },
}

impl Violation {
    pub fn step(&self) -> StepId {
        match self {
            Violation::AltitudeExceeded { step, .. }
            | Violation::NoFlyZone { step, .. }
            | Violation::UsvRestricted { step, .. }
            | Violation::OutOfBounds { step, .. }
            | Violation::UnknownLandmark { step, .. }
            | Violation::MissingCarrierPositioning { step }
            | Violation::ActionNotAllowed { step, .. } => *step,
        }
    }

    /// Whether the violation concerns where a waypoint lies.
    pub fn is_spatial(&self) -> bool {
        matches!(
            self,
            Violation::NoFlyZone { .. } | Violation::UsvRestricted { .. } | Violation::OutOfBounds { .. }
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn spatial(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_spatial())
    }
}

fn is_dynamic_landmark(name: &str) -> bool {
    name == USV_DECK || name == HOVER_ABOVE_USV
}

/// Resolve a target against the request's landmark table; dynamic names resolve to `None`.
fn resolve(target: &Target, request: &MissionRequest) -> Result<Option<Point>, String> {
    match target {
        Target::Coords(p) => Ok(Some(*p)),
        Target::Named(name) if is_dynamic_landmark(name) => Ok(None),
        Target::Named(name) => request.landmark(name).map(Some).ok_or_else(|| name.clone()),
    }
}

fn waypoints(step: &SymbolicAction, request: &MissionRequest, out: &mut Vec<Violation>) -> Vec<Point> {
    let mut resolve_or_flag = |t: &Target| match resolve(t, request) {
        Ok(p) => p,
        Err(name) => {
            out.push(Violation::UnknownLandmark { step: step.id, name });
            None
        }
    };
    match &step.theta {
        ThetaParams::Point { target, .. } => target.as_ref().and_then(resolve_or_flag).into_iter().collect(),
        ThetaParams::Orbit360 { center, radius, .. } => resolve_or_flag(center)
            .map(|c| circle_points(&c, *radius, ORBIT_SAMPLES))
            .unwrap_or_default(),
        ThetaParams::Rectangle { vertices, .. } => vertices.to_vec(),
    }
}

/// Transitive precondition closure; tolerates cycles.
fn ancestors(plan: &MissionPlan, id: StepId) -> BTreeSet<StepId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<StepId> = plan.steps[id].preconditions.iter().copied().collect();
    while let Some(s) = stack.pop() {
        if s < plan.len() && seen.insert(s) {
            stack.extend(plan.steps[s].preconditions.iter().copied());
        }
    }
    seen
}

/// Check a parsed plan against the mission's restrictions. Violations are data, not errors.
pub fn validate_plan(plan: &MissionPlan, request: &MissionRequest) -> ValidationReport {
    let mut violations = Vec::new();
    let knowledge = &request.knowledge;
    let bounds = &request.environment.bounds;

    for step in &plan.steps {
        if !request.allowed_actions.contains(&step.action) {
            violations.push(Violation::ActionNotAllowed { step: step.id, action: step.action });
        }
        if step.robot == Robot::Uav {
            if let Some(alt) = step.theta.altitude() {
                if alt > knowledge.max_altitude {
                    violations.push(Violation::AltitudeExceeded { step: step.id, altitude: alt, max: knowledge.max_altitude });
                }
            }
        }

        for p in waypoints(step, request, &mut violations) {
            if !bounds.contains_xy(&p) {
                violations.push(Violation::OutOfBounds { step: step.id, point: p });
                continue;
            }
            let zones = match step.robot {
                Robot::Uav => &knowledge.no_fly_zones,
                Robot::Usv => &knowledge.usv_restricted,
            };
            if let Some(zone) = zones.iter().find(|z| z.polygon.contains(&p)) {
                violations.push(match step.robot {
                    Robot::Uav => Violation::NoFlyZone { step: step.id, zone: zone.name.clone(), point: p },
                    Robot::Usv => Violation::UsvRestricted { step: step.id, zone: zone.name.clone(), point: p },
                });
            }
        }

        if step.action == ActionKind::Takeoff && step.theta.target().is_some_and(|t| t.is_named(USV_DECK)) {
            let positioned = ancestors(plan, step.id)
                .into_iter()
                .any(|a| plan.steps[a].robot == Robot::Usv && plan.steps[a].action == ActionKind::Navigate);
            if !positioned {
                violations.push(Violation::MissingCarrierPositioning { step: step.id });
            }
        }
    }
    ValidationReport { violations }
}
