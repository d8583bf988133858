use super::{ClientError, PlannerClient, PlannerResponse, ReplanContext};
use crate::geometry::Point;
use crate::plan::{
    ActionKind, MissionPlan, MissionRequest, Robot, StepId, SymbolicAction, Target, ThetaParams, HOVER_ABOVE_USV,
    PORT_DOCK, USV_DECK,
};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;
use std::time::Duration;

const SURVEY_ALTITUDE: f64 = 20.0;
const INSPECT_ALTITUDE: f64 = 15.0;
const HOVER_ALTITUDE: f64 = 10.0;
const ORBIT_RADIUS: f64 = 12.0;
/// Half extents of the container survey rectangle, meters.
const CONTAINER_HALF_EXTENTS: (f64, f64) = (15.0, 10.0);

fn named(name: &str, altitude: Option<f64>) -> ThetaParams {
    ThetaParams::point(Some(Target::named(name)), altitude)
}

/// Accumulates steps with dense ids.
struct Builder {
    steps: Vec<SymbolicAction>,
}

impl Builder {
    fn new() -> Self {
        Self { steps: Vec::new() }
    }

    fn add(&mut self, action: ActionKind, robot: Robot, theta: ThetaParams, after: &[StepId]) -> StepId {
        let id = self.steps.len();
        self.steps.push(SymbolicAction::new(id, action, robot).with_theta(theta).after(after.iter().copied()));
        id
    }

    fn inspect(&mut self, robot: Robot, theta: ThetaParams, queries: &[&str], after: &[StepId]) -> StepId {
        let id = self.add(ActionKind::Inspect, robot, theta, after);
        self.steps[id].sigma = queries.iter().map(|q| q.to_string()).collect();
        id
    }

    fn survey(&mut self, theta: ThetaParams, queries: &[&str], after: &[StepId]) -> StepId {
        let id = self.add(ActionKind::Survey, Robot::Uav, theta, after);
        self.steps[id].sigma = queries.iter().map(|q| q.to_string()).collect();
        id
    }

    /// FlyTo above the USV, land, and send the USV home.
    fn recover(&mut self, after: &[StepId]) -> StepId {
        let hover = self.add(ActionKind::FlyTo, Robot::Uav, named(HOVER_ABOVE_USV, Some(HOVER_ALTITUDE)), after);
        let land = self.add(ActionKind::LandOnUSV, Robot::Uav, named(USV_DECK, None), &[hover]);
        self.steps[land].sigma = vec!["safety_checks".into()];
        self.add(ActionKind::GoHome, Robot::Usv, named(PORT_DOCK, None), &[land])
    }

    fn finish(self, mission_id: &str) -> MissionPlan {
        MissionPlan::new(mission_id, self.steps)
    }
}

const CRANE_QUERIES: [&str; 2] = ["Is there any vehicle near the crane?", "Is there any human in the crane loading area?"];
const CONTAINER_QUERIES: [&str; 2] =
    ["Is there any human near the container stack?", "Is there any vehicle near the container stack?"];
const SAILBOAT_QUERIES: [&str; 1] = ["Are there any sailboats at the docking station?"];

fn crane_inspection() -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("CraneStandoff", None), &[]);
    let takeoff = b.add(ActionKind::Takeoff, Robot::Uav, named(USV_DECK, Some(INSPECT_ALTITUDE)), &[nav]);
    let fly = b.add(ActionKind::FlyTo, Robot::Uav, named("Crane", Some(INSPECT_ALTITUDE)), &[takeoff]);
    let inspect = b.inspect(Robot::Uav, named("Crane", None), &CRANE_QUERIES, &[fly]);
    b.recover(&[inspect]);
    b.finish("crane_inspection")
}

fn crane_orbit() -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("CraneStandoff", None), &[]);
    let takeoff = b.add(ActionKind::Takeoff, Robot::Uav, named(USV_DECK, Some(INSPECT_ALTITUDE)), &[nav]);
    let orbit = ThetaParams::Orbit360 { center: Target::named("Crane"), radius: ORBIT_RADIUS, altitude: INSPECT_ALTITUDE };
    let inspect = b.inspect(Robot::Uav, orbit, &CRANE_QUERIES, &[takeoff]);
    b.recover(&[inspect]);
    b.finish("crane_orbit")
}

fn rectangle_around(center: Point, half_w: f64, half_h: f64) -> ThetaParams {
    let (x0, x1, y0, y1) = (center.x - half_w, center.x + half_w, center.y - half_h, center.y + half_h);
    ThetaParams::Rectangle {
        vertices: [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
        altitude: SURVEY_ALTITUDE,
    }
}

fn container_rectangle(request: &MissionRequest) -> ThetaParams {
    let c = request.landmark("ContainerStack").expect("checked by caller");
    rectangle_around(c, CONTAINER_HALF_EXTENTS.0, CONTAINER_HALF_EXTENTS.1)
}

fn container_survey(request: &MissionRequest) -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("ContainerStandoff", None), &[]);
    let takeoff = b.add(ActionKind::Takeoff, Robot::Uav, named(USV_DECK, Some(SURVEY_ALTITUDE)), &[nav]);
    let survey = b.survey(container_rectangle(request), &CONTAINER_QUERIES, &[takeoff]);
    b.recover(&[survey]);
    b.finish("container_survey")
}

fn docking_sailboats() -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("DockingStandoff", None), &[]);
    let record = b.add(ActionKind::Record, Robot::Usv, ThetaParams::default(), &[nav]);
    let inspect = b.inspect(Robot::Usv, named("DockingStation", None), &SAILBOAT_QUERIES, &[record]);
    let report = b.add(ActionKind::Report, Robot::Usv, ThetaParams::default(), &[inspect]);
    b.add(ActionKind::GoHome, Robot::Usv, named(PORT_DOCK, None), &[report]);
    b.finish("docking_sailboats")
}

fn docking_and_containers(request: &MissionRequest) -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("ContainerStandoff", None), &[]);
    let takeoff = b.add(ActionKind::Takeoff, Robot::Uav, named(USV_DECK, Some(SURVEY_ALTITUDE)), &[nav]);
    let survey = b.survey(container_rectangle(request), &CONTAINER_QUERIES, &[takeoff]);
    let to_dock = b.add(ActionKind::Navigate, Robot::Usv, named("DockingStandoff", None), &[takeoff]);
    let inspect = b.inspect(Robot::Usv, named("DockingStation", None), &SAILBOAT_QUERIES, &[to_dock]);
    let back = b.add(ActionKind::Navigate, Robot::Usv, named("ContainerStandoff", None), &[inspect]);
    b.recover(&[survey, back]);
    b.finish("docking_container_survey")
}

fn crane_and_docking() -> MissionPlan {
    let mut b = Builder::new();
    let nav = b.add(ActionKind::Navigate, Robot::Usv, named("CraneStandoff", None), &[]);
    let takeoff = b.add(ActionKind::Takeoff, Robot::Uav, named(USV_DECK, Some(INSPECT_ALTITUDE)), &[nav]);
    let fly = b.add(ActionKind::FlyTo, Robot::Uav, named("Crane", Some(INSPECT_ALTITUDE)), &[takeoff]);
    let crane = b.inspect(Robot::Uav, named("Crane", None), &CRANE_QUERIES, &[fly]);
    let to_dock = b.add(ActionKind::Navigate, Robot::Usv, named("DockingStandoff", None), &[takeoff]);
    let dock = b.inspect(Robot::Usv, named("DockingStation", None), &SAILBOAT_QUERIES, &[to_dock]);
    let back = b.add(ActionKind::Navigate, Robot::Usv, named("CraneStandoff", None), &[dock]);
    b.recover(&[crane, back]);
    b.finish("joint_crane_docking")
}

/// `ContainerStack` -> `container stack`.
fn spaced(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push(' ');
        }
        out.extend(c.to_lowercase());
    }
    out
}

fn generic(request: &MissionRequest, text: &str) -> MissionPlan {
    let mut b = Builder::new();
    let mentioned = request
        .environment
        .landmarks
        .keys()
        .filter(|name| name.as_str() != PORT_DOCK && !name.ends_with("Standoff"))
        .filter_map(|name| text.find(&spaced(name)).map(|pos| (pos, name)))
        .min();
    match mentioned {
        Some((_, name)) => {
            let standoff = format!("{name}Standoff");
            let goal = if request.landmark(&standoff).is_some() { standoff } else { name.clone() };
            let nav = b.add(ActionKind::Navigate, Robot::Usv, named(&goal, None), &[]);
            let query = format!("Is there any vessel near the {}?", spaced(name));
            let inspect = b.inspect(Robot::Usv, named(name, None), &[query.as_str()], &[nav]);
            b.add(ActionKind::GoHome, Robot::Usv, named(PORT_DOCK, None), &[inspect]);
        }
        None => {
            b.add(ActionKind::Hover, Robot::Usv, ThetaParams::with_dwell(1.0), &[]);
        }
    }
    b.finish("generic")
}

fn has_all(request: &MissionRequest, names: &[&str]) -> bool {
    names.iter().all(|n| request.landmark(n).is_some())
}

/// Offline planner: picks a plan template from instruction keywords and the
/// landmarks the request knows about. Pure and deterministic.
#[derive(Debug, Clone, Default)]
pub struct StubPlanner;

impl StubPlanner {
    pub fn template(&self, request: &MissionRequest) -> MissionPlan {
        let text = request.instruction.to_lowercase();
        let says = |words: &[&str]| words.iter().any(|w| text.contains(w));
        let crane = says(&["crane"]) && has_all(request, &["CraneStandoff", "Crane"]);
        let docking = says(&["docking", "sailboat", "pier"]) && has_all(request, &["DockingStandoff", "DockingStation"]);
        let container = says(&["container"]) && has_all(request, &["ContainerStandoff", "ContainerStack"]);
        match (crane, docking, container) {
            (true, true, _) => crane_and_docking(),
            (_, true, true) => docking_and_containers(request),
            (true, _, _) if says(&["orbit", "circle", "360", "around"]) => crane_orbit(),
            (true, _, _) => crane_inspection(),
            (_, _, true) => container_survey(request),
            (_, true, _) => docking_sailboats(),
            _ => generic(request, &text),
        }
    }
}

/// Plan for what is left after `completed`: the remaining steps of the
/// previous plan in order, renumbered, with completed prerequisites dropped.
pub fn replan_remaining(previous: &MissionPlan, completed: &BTreeSet<StepId>) -> MissionPlan {
    let remap: BTreeMap<StepId, StepId> = previous
        .steps
        .iter()
        .filter(|s| !completed.contains(&s.id))
        .enumerate()
        .map(|(new, s)| (s.id, new))
        .collect();
    let steps = previous
        .steps
        .iter()
        .filter_map(|s| {
            let id = *remap.get(&s.id)?;
            let mut step = s.clone();
            step.id = id;
            step.preconditions = s.preconditions.iter().filter_map(|p| remap.get(p).copied()).collect();
            Some(step)
        })
        .collect();
    MissionPlan::new(previous.mission_id.clone(), steps)
}

impl PlannerClient for StubPlanner {
    fn label(&self) -> &str {
        "stub"
    }

    fn plan(&self, request: &MissionRequest, replan: Option<&ReplanContext>) -> Result<PlannerResponse, ClientError> {
        let plan = match replan {
            Some(ctx) => replan_remaining(&ctx.previous, &ctx.completed),
            None => self.template(request),
        };
        Ok(PlannerResponse { document: plan.to_document(), latency: Duration::ZERO })
    }
}

/// Returns canned documents in order; the last one repeats.
pub struct ScriptedPlanner {
    label: String,
    documents: Vec<String>,
    next: Mutex<usize>,
}

impl ScriptedPlanner {
    pub fn new(label: impl Into<String>, documents: Vec<String>) -> Self {
        assert!(!documents.is_empty(), "scripted planner needs at least one document");
        Self { label: label.into(), documents, next: Mutex::new(0) }
    }
}

impl PlannerClient for ScriptedPlanner {
    fn label(&self) -> &str {
        &self.label
    }

    fn plan(&self, _request: &MissionRequest, _replan: Option<&ReplanContext>) -> Result<PlannerResponse, ClientError> {
        let mut next = self.next.lock().expect("scripted planner poisoned");
        let doc = self.documents[(*next).min(self.documents.len() - 1)].clone();
        *next += 1;
        Ok(PlannerResponse { document: doc, latency: Duration::ZERO })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depgraph::build_graph;
    use crate::plan::{parse_plan, validate_plan};
    use crate::world::WorldState;

    fn request(instruction: &str) -> MissionRequest {
        let world = WorldState::default_port();
        MissionRequest::new(instruction, world.env_description(), world.scene.knowledge.clone())
    }

    const INSTRUCTIONS: [&str; 7] = [
        "Inspect the crane for vehicles and people.",
        "Orbit the crane once and report anything unusual.",
        "Survey the container stack from above.",
        "Check the docking station for sailboats.",
        "Inspect the docking station and the container stack.",
        "Jointly inspect the crane and the docking station.",
        "Go look at the open water.",
    ];

    #[test]
    fn every_template_is_admissible() {
        for text in INSTRUCTIONS {
            let req = request(text);
            let doc = StubPlanner.plan(&req, None).unwrap().document;
            let plan = parse_plan(&doc).unwrap_or_else(|e| panic!("{text}: {e}"));
            build_graph(&plan).unwrap();
            let report = validate_plan(&plan, &req);
            assert!(report.is_admissible(), "{text}: {:?}", report.violations);
        }
    }

    #[test]
    fn routing() {
        let ids: Vec<String> = INSTRUCTIONS.iter().map(|t| StubPlanner.template(&request(t)).mission_id).collect();
        assert_eq!(
            ids,
            [
                "crane_inspection",
                "crane_orbit",
                "container_survey",
                "docking_sailboats",
                "docking_container_survey",
                "joint_crane_docking",
                "generic"
            ]
        );
    }

    #[test]
    fn crane_chain_shape() {
        let plan = StubPlanner.template(&request("Inspect the crane."));
        let labels: Vec<String> = plan.steps.iter().map(|s| format!("{} {}", s.robot, s.action)).collect();
        assert_eq!(
            labels,
            [
                "USV Navigate",
                "UAV Takeoff",
                "UAV FlyTo",
                "UAV Inspect",
                "UAV FlyTo",
                "UAV LandOnUSV",
                "USV GoHome"
            ]
        );
        for (i, s) in plan.steps.iter().enumerate().skip(1) {
            assert_eq!(s.preconditions, BTreeSet::from([i - 1]));
        }
    }

    #[test]
    fn deterministic() {
        let req = request("Inspect the crane.");
        assert_eq!(StubPlanner.plan(&req, None).unwrap(), StubPlanner.plan(&req, None).unwrap());
    }

    #[test]
    fn replan_drops_completed() {
        let plan = StubPlanner.template(&request("Inspect the crane."));
        let rest = replan_remaining(&plan, &BTreeSet::from([0, 1]));
        assert_eq!(rest.len(), 5);
        assert_eq!(rest.steps[0].action, ActionKind::FlyTo);
        assert!(rest.steps[0].preconditions.is_empty());
        assert_eq!(rest.steps[1].preconditions, BTreeSet::from([0]));
    }

    #[test]
    fn scripted_repeats_last() {
        let p = ScriptedPlanner::new("s", vec!["a".into(), "b".into()]);
        let req = request("x");
        let docs: Vec<String> = (0..3).map(|_| p.plan(&req, None).unwrap().document).collect();
        assert_eq!(docs, ["a", "b", "b"]);
    }
}
