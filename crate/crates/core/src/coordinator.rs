//! Mission execution loop: dispatch ready steps, advance the world one tick
//! per cycle, run inspections, raise alerts and replan on failure.

use crate::clients::{
    ClientError, InspectionReport, InspectorClient, PlannerClient, ReplanContext, Severity,
};
use crate::depgraph::{build_graph, ready_set, DependencyGraph, ExecutionState};
use crate::executor::{Effect, ExecFailure, ExecStatus, Executor, IdleHold, RobotCommand};
use crate::plan::{
    parse_plan, validate_plan, ActionKind, MissionPlan, MissionRequest, Robot, StepId, SymbolicAction, Target,
    ThetaParams, Violation, HOVER_ABOVE_USV, PORT_DOCK, USV_DECK,
};
use crate::executor::HOVER_ABOVE_USV_ALTITUDE;
use crate::world::{SceneObservation, WorldState};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;
use thiserror::Error;

/// Extra ticks granted to the safe-return sequence beyond `max_ticks`.
const SAFE_RETURN_TICKS: u64 = 24_000;

pub const DEFAULT_CRITICAL_KEYWORDS: [&str; 4] = ["human", "vehicle", "collision", "fire"];

/// Deterministic failure injection: step `step` of plan generation `plan`
/// fails on its first poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub plan: usize,
    pub step: StepId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanPolicy {
    pub max_replans: u32,
    pub max_ticks: u64,
    pub critical_keywords: Vec<String>,
    #[serde(default)]
    pub faults: Vec<Fault>,
    /// Operator abort at this tick.
    #[serde(default)]
    pub abort_at: Option<u64>,
    pub safe_return: bool,
}

impl Default for ReplanPolicy {
    fn default() -> Self {
        Self {
            max_replans: 2,
            max_ticks: 72_000,
            critical_keywords: DEFAULT_CRITICAL_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            faults: Vec::new(),
            abort_at: None,
            safe_return: true,
        }
    }
}

impl ReplanPolicy {
    pub fn with_fault(mut self, plan: usize, step: StepId) -> Self {
        self.faults.push(Fault { plan, step });
        self
    }

    pub fn with_max_replans(mut self, n: u32) -> Self {
        self.max_replans = n;
        self
    }
}

pub struct ModelClients<'a> {
    pub planner: &'a dyn PlannerClient,
    pub inspector: &'a dyn InspectorClient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionStatus {
    Succeeded,
    Failed,
    Aborted,
}

impl MissionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MissionStatus::Succeeded => "Succeeded",
            MissionStatus::Failed => "Failed",
            MissionStatus::Aborted => "Aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum StepResult {
    Completed,
    Failed { failure: ExecFailure },
    Skipped,
}

/// One executed (or skipped) step. Intervals are closed: a step occupies
/// ticks `start..=end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    /// Index into [`MissionOutcome::plans`].
    pub plan: usize,
    pub step: StepId,
    pub robot: Robot,
    pub action: ActionKind,
    pub start: u64,
    pub end: u64,
    #[serde(flatten)]
    pub result: StepResult,
}

impl TimelineEntry {
    pub fn executed(&self) -> bool {
        self.result != StepResult::Skipped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub tick: u64,
    pub plan: usize,
    pub step: StepId,
    pub robot: Robot,
    pub concern: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    MissionStart { tick: u64, mission_id: String, steps: usize },
    StepStarted { tick: u64, plan: usize, step: StepId, robot: Robot, action: ActionKind },
    StepCompleted { tick: u64, plan: usize, step: StepId, robot: Robot, action: ActionKind },
    StepFailed { tick: u64, plan: usize, step: StepId, robot: Robot, action: ActionKind, reason: String },
    Inspection { tick: u64, plan: usize, step: StepId, robot: Robot, concerns: usize },
    Alert { tick: u64, plan: usize, step: StepId, robot: Robot, concern: String },
    RecordingStarted { tick: u64, robot: Robot },
    ReportFlushed { tick: u64, robot: Robot, reports: usize },
    BoundaryViolation { tick: u64, robot: Robot },
    Replanned { tick: u64, plan: usize, steps: usize, reason: String },
    ReplanFailed { tick: u64, error: String },
    SafeReturn { tick: u64, plan: usize, steps: usize },
    Aborted { tick: u64 },
    MissionEnd { tick: u64, status: MissionStatus },
}

/// Vehicle state at the end of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub usv: [f64; 4],
    pub uav: [f64; 4],
    pub uav_docked: bool,
}

impl TraceRow {
    fn of(world: &WorldState) -> Self {
        let (u, a) = (&world.usv, &world.uav);
        Self {
            tick: world.tick,
            usv: [u.x, u.y, u.psi, u.v],
            uav: [a.position.x, a.position.y, a.position.z, a.psi],
            uav_docked: world.uav_docked,
        }
    }
}

pub const TRACE_HEADER: &str = "tick\ttime\tusv_x\tusv_y\tusv_psi\tusv_v\tuav_x\tuav_y\tuav_z\tuav_psi\tuav_docked";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionOutcome {
    pub mission_id: String,
    pub status: MissionStatus,
    /// Every adopted plan in order: the initial plan, replans, then the
    /// safe-return sequence if one ran.
    pub plans: Vec<MissionPlan>,
    pub safe_return_plan: Option<usize>,
    pub timeline: Vec<TimelineEntry>,
    pub inspection_results: Vec<InspectionReport>,
    pub alerts: Vec<Alert>,
    pub replans: u32,
    pub end_tick: u64,
    pub dt: f64,
    pub events: Vec<Event>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    /// Wall-clock planner latency of replans; kept out of events and traces.
    #[serde(skip)]
    pub planner_latency: Duration,
}

impl MissionOutcome {
    fn new(mission_id: &str, dt: f64) -> Self {
        Self {
            mission_id: mission_id.to_string(),
            status: MissionStatus::Failed,
            plans: Vec::new(),
            safe_return_plan: None,
            timeline: Vec::new(),
            inspection_results: Vec::new(),
            alerts: Vec::new(),
            replans: 0,
            end_tick: 0,
            dt,
            events: Vec::new(),
            trace: Vec::new(),
            planner_latency: Duration::ZERO,
        }
    }

    /// Entries of one plan generation, in start order.
    pub fn entries_of(&self, plan: usize) -> Vec<&TimelineEntry> {
        self.timeline.iter().filter(|e| e.plan == plan).collect()
    }

    /// Ticks from the first step start to the last step end, inclusive.
    pub fn makespan(&self) -> u64 {
        let executed = self.timeline.iter().filter(|e| e.executed());
        let start = executed.clone().map(|e| e.start).min();
        let end = executed.map(|e| e.end).max();
        match (start, end) {
            (Some(s), Some(e)) => e - s + 1,
            _ => 0,
        }
    }

    /// Steps whose start did not strictly follow the end of every prerequisite.
    pub fn precondition_violations(&self) -> Vec<(usize, StepId)> {
        let ends: BTreeMap<(usize, StepId), (u64, bool)> = self
            .timeline
            .iter()
            .filter(|e| e.executed())
            .map(|e| ((e.plan, e.step), (e.end, e.result == StepResult::Completed)))
            .collect();
        self.timeline
            .iter()
            .filter(|e| e.executed())
            .filter(|e| {
                self.plans[e.plan].steps[e.step].preconditions.iter().any(|p| match ends.get(&(e.plan, *p)) {
                    Some((end, true)) => *end >= e.start,
                    _ => true,
                })
            })
            .map(|e| (e.plan, e.step))
            .collect()
    }

    /// Pairs of same-robot entries whose closed intervals overlap.
    pub fn exclusivity_violations(&self) -> Vec<(TimelineEntry, TimelineEntry)> {
        let mut out = Vec::new();
        for robot in Robot::ALL {
            let mut entries: Vec<&TimelineEntry> =
                self.timeline.iter().filter(|e| e.executed() && e.robot == robot).collect();
            entries.sort_by_key(|e| (e.start, e.end));
            for w in entries.windows(2) {
                if w[1].start <= w[0].end {
                    out.push((w[0].clone(), w[1].clone()));
                }
            }
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serialization") + "\n").collect()
    }

    pub fn trace_tsv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{}\t{:.2}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
                r.tick,
                r.tick as f64 * self.dt,
                r.usv[0],
                r.usv[1],
                r.usv[2],
                r.usv[3],
                r.uav[0],
                r.uav[1],
                r.uav[2],
                r.uav[3],
                u8::from(r.uav_docked)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("replanning budget exhausted")]
    BudgetExhausted,
    #[error("planner unavailable: {0}")]
    PlannerUnavailable(ClientError),
    #[error("planner returned an invalid plan: {0}")]
    InvalidPlanReturned(String),
}

/// Parse, graph-check and validate a planner document before adoption.
/// `carrier_positioned` waives the carrier-positioning rule once the USV has
/// already navigated earlier in the mission.
pub fn admit_plan(
    document: &str,
    request: &MissionRequest,
    carrier_positioned: bool,
) -> Result<(MissionPlan, DependencyGraph), PlanError> {
    let plan = parse_plan(document).map_err(|e| PlanError::InvalidPlanReturned(e.to_string()))?;
    let graph = build_graph(&plan).map_err(|e| PlanError::InvalidPlanReturned(e.to_string()))?;
    let report = validate_plan(&plan, request);
    let blocking: Vec<&Violation> = report
        .violations
        .iter()
        .filter(|v| !(carrier_positioned && matches!(v, Violation::MissingCarrierPositioning { .. })))
        .collect();
    if let Some(v) = blocking.first() {
        return Err(PlanError::InvalidPlanReturned(format!("{} violation(s), first: {v:?}", blocking.len())));
    }
    Ok((plan, graph))
}

/// Ask the planner for the initial plan and admit it.
pub fn plan_mission(request: &MissionRequest, planner: &dyn PlannerClient) -> Result<(MissionPlan, Duration), PlanError> {
    let response = planner.plan(request, None).map_err(PlanError::PlannerUnavailable)?;
    let (plan, _) = admit_plan(&response.document, request, false)?;
    Ok((plan, response.latency))
}

/// Ask the planner for a plan covering what remains of `failed`.
pub fn replan(
    request: &MissionRequest,
    context: &ReplanContext,
    planner: &dyn PlannerClient,
    policy: &ReplanPolicy,
    used: u32,
    carrier_positioned: bool,
) -> Result<(MissionPlan, DependencyGraph, Duration), PlanError> {
    if used >= policy.max_replans {
        return Err(PlanError::BudgetExhausted);
    }
    let response = planner.plan(request, Some(context)).map_err(PlanError::PlannerUnavailable)?;
    let (plan, graph) = admit_plan(&response.document, request, carrier_positioned)?;
    Ok((plan, graph, response.latency))
}

/// Which robots are free to take a new step.
pub type RobotAvailability = [bool; 2];

/// Ready steps to start now: at most one per idle robot, lowest id first.
pub fn dispatch_ready(
    state: &ExecutionState,
    graph: &DependencyGraph,
    plan: &MissionPlan,
    available: RobotAvailability,
) -> Vec<StepId> {
    let mut free = available;
    let mut out = Vec::new();
    for id in ready_set(graph, state) {
        let r = plan.steps[id].robot.index();
        if free[r] {
            free[r] = false;
            out.push(id);
        }
    }
    out
}

/// Whether any concern mentions a critical keyword as a whole word.
pub fn is_critical(text: &str, keywords: &[String]) -> bool {
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).collect();
    keywords.iter().any(|k| words.contains(&k.to_lowercase().as_str()))
}

/// Run the inspector on an observation for a step's queries and collect alerts.
pub fn inspect_observation(
    step: &SymbolicAction,
    observation: &SceneObservation,
    inspector: &dyn InspectorClient,
    context: &str,
    keywords: &[String],
) -> Result<(InspectionReport, Vec<(String, Severity)>), ClientError> {
    let response = inspector.inspect(observation, &step.sigma, context)?;
    let critical = response
        .report
        .concerns
        .iter()
        .filter(|c| is_critical(&c.text, keywords))
        .map(|c| (c.text.clone(), c.severity))
        .collect();
    Ok((response.report, critical))
}

/// Capture an observation from the current world and inspect it.
pub fn handle_inspection(
    step: &SymbolicAction,
    world: &WorldState,
    inspector: &dyn InspectorClient,
    keywords: &[String],
) -> Result<(InspectionReport, Vec<(String, Severity)>), ClientError> {
    inspect_observation(step, &world.observe(step.robot), inspector, &step.describe(), keywords)
}

enum RunEnd {
    Completed,
    Failed { step: StepId, reason: String },
    Aborted,
    OutOfTime,
}

struct Runner<'a> {
    world: WorldState,
    request: &'a MissionRequest,
    clients: &'a ModelClients<'a>,
    policy: &'a ReplanPolicy,
    out: MissionOutcome,
    hold: IdleHold,
    tick_limit: u64,
}

impl Runner<'_> {
    fn emit(&mut self, event: Event) {
        self.out.events.push(event);
    }

    fn carrier_positioned(&self) -> bool {
        self.out
            .timeline
            .iter()
            .any(|e| e.robot == Robot::Usv && e.action == ActionKind::Navigate && e.result == StepResult::Completed)
    }

    fn record(&mut self, plan: usize, step: &SymbolicAction, start: u64, end: u64, result: StepResult) {
        let tick = end;
        let (id, robot, action) = (step.id, step.robot, step.action);
        match &result {
            StepResult::Completed => self.emit(Event::StepCompleted { tick, plan, step: id, robot, action }),
            StepResult::Failed { failure } => {
                self.emit(Event::StepFailed { tick, plan, step: id, robot, action, reason: failure.to_string() })
            }
            StepResult::Skipped => {}
        }
        self.out.timeline.push(TimelineEntry { plan, step: id, robot, action, start, end, result });
    }

    /// Apply an effect; a failed inspection turns into a step failure.
    fn apply(&mut self, plan: usize, step: &SymbolicAction, effect: Effect) -> Result<(), ExecFailure> {
        let tick = self.world.tick.saturating_sub(1);
        match effect {
            Effect::Undock => self.world.uav_docked = false,
            Effect::Dock => {
                self.world = self.world.clone().with_uav_docked(true);
                self.hold.reset();
            }
            Effect::StartRecording(robot) => self.emit(Event::RecordingStarted { tick, robot }),
            Effect::FlushReports(robot) => {
                let reports = self.out.inspection_results.len();
                self.emit(Event::ReportFlushed { tick, robot, reports });
            }
            Effect::Capture(obs) => {
                if step.sigma.is_empty() {
                    return Ok(());
                }
                let context = format!("Mission: {}\nStep {}: {}", self.request.instruction, step.id, step.describe());
                let mut obs = obs;
                obs.frame_id = tick;
                let (mut report, critical) =
                    inspect_observation(step, &obs, self.clients.inspector, &context, &self.policy.critical_keywords)
                        .map_err(|e| ExecFailure::InspectorUnavailable { detail: e.to_string() })?;
                report.tick = tick;
                let (id, robot) = (step.id, step.robot);
                self.emit(Event::Inspection { tick, plan, step: id, robot, concerns: report.concerns.len() });
                for (concern, severity) in critical {
                    self.emit(Event::Alert { tick, plan, step: id, robot, concern: concern.clone() });
                    self.out.alerts.push(Alert { tick, plan, step: id, robot, concern, severity });
                }
                self.out.inspection_results.push(report);
            }
        }
        Ok(())
    }

    fn execute(&mut self, plan_index: usize, graph: &DependencyGraph, abortable: bool) -> RunEnd {
        let plan = self.out.plans[plan_index].clone();
        let mut state = ExecutionState::new(graph);
        let mut running: BTreeMap<StepId, (Executor, u64, bool)> = BTreeMap::new();
        let mut failure: Option<(StepId, String)> = None;
        loop {
            let k = self.world.tick;
            if abortable && self.policy.abort_at.is_some_and(|a| k >= a) {
                // Running steps last advanced during cycle k - 1.
                for (id, (_, start, _)) in std::mem::take(&mut running) {
                    let failure = ExecFailure::Cancelled;
                    self.record(plan_index, &plan.steps[id], start, k - 1, StepResult::Failed { failure });
                }
                self.emit(Event::Aborted { tick: k });
                return RunEnd::Aborted;
            }
            if k >= self.tick_limit {
                for (id, (_, start, _)) in std::mem::take(&mut running) {
                    let failure = ExecFailure::Timeout { ticks: k - start };
                    self.record(plan_index, &plan.steps[id], start, k - 1, StepResult::Failed { failure });
                }
                return RunEnd::OutOfTime;
            }
            match &failure {
                Some((step, reason)) if running.is_empty() => {
                    return RunEnd::Failed { step: *step, reason: reason.clone() };
                }
                None if state.is_finished() => return RunEnd::Completed,
                _ => {}
            }

            if failure.is_none() {
                let mut available = [true; 2];
                for (ex, _, _) in running.values() {
                    available[ex.robot.index()] = false;
                }
                for id in dispatch_ready(&state, graph, &plan, available) {
                    let step = &plan.steps[id];
                    state.start(graph, id).expect("dispatched step is ready");
                    self.emit(Event::StepStarted { tick: k, plan: plan_index, step: id, robot: step.robot, action: step.action });
                    match Executor::start(step, &self.world) {
                        Ok(ex) => {
                            let faulty = self.policy.faults.contains(&Fault { plan: plan_index, step: id });
                            running.insert(id, (ex, k, faulty));
                        }
                        Err(f) => {
                            failure = Some((id, f.to_string()));
                            self.record(plan_index, step, k, k, StepResult::Failed { failure: f });
                            break;
                        }
                    }
                }
            }

            let mut usv_cmd = None;
            let mut uav_cmd = None;
            for (ex, _, _) in running.values_mut() {
                match ex.command(&self.world) {
                    RobotCommand::Usv(c) => usv_cmd = Some(c),
                    RobotCommand::Uav(c) => uav_cmd = Some(c),
                }
            }
            let ids: Vec<StepId> = running.keys().copied().collect();
            for id in &ids {
                let effects = running.get_mut(id).expect("running step").0.take_effects();
                for effect in effects {
                    let _ = self.apply(plan_index, &plan.steps[*id], effect);
                }
            }
            let usv_cmd = usv_cmd.unwrap_or_else(|| self.hold.usv(&self.world));
            let uav_cmd = match uav_cmd {
                Some(c) => {
                    self.hold.reset();
                    c
                }
                None => self.hold.uav(&self.world),
            };
            self.world = self.world.step(&usv_cmd, &uav_cmd);
            for e in self.world.events.clone() {
                let crate::world::WorldEvent::BoundaryViolation { robot, .. } = e;
                self.emit(Event::BoundaryViolation { tick: k, robot });
            }

            for id in ids {
                let (ex, start, faulty) = running.get_mut(&id).expect("running step");
                let (start, faulty) = (*start, *faulty);
                let status = if faulty { ExecStatus::Failed(ExecFailure::Injected) } else { ex.poll(&self.world) };
                let effects = ex.take_effects();
                let step = &plan.steps[id];
                let result = match status {
                    ExecStatus::Running => continue,
                    ExecStatus::Succeeded => {
                        let mut result = StepResult::Completed;
                        for effect in effects {
                            if let Err(f) = self.apply(plan_index, step, effect) {
                                result = StepResult::Failed { failure: f };
                            }
                        }
                        result
                    }
                    ExecStatus::Failed(f) => StepResult::Failed { failure: f },
                };
                running.remove(&id);
                if let StepResult::Failed { failure: f } = &result {
                    failure.get_or_insert((id, f.to_string()));
                } else {
                    state.mark_complete(id).expect("step was executing");
                }
                self.record(plan_index, step, start, k, result);
            }
            self.out.trace.push(TraceRow::of(&self.world));
        }
    }

    fn adopt(&mut self, plan: MissionPlan) -> usize {
        self.out.plans.push(plan);
        self.out.plans.len() - 1
    }

    fn safe_return(&mut self) {
        let mut steps = Vec::new();
        if !self.world.uav_docked {
            steps.push(
                SymbolicAction::new(0, ActionKind::FlyTo, Robot::Uav)
                    .with_theta(ThetaParams::point(Some(Target::named(HOVER_ABOVE_USV)), Some(HOVER_ABOVE_USV_ALTITUDE))),
            );
            steps.push(
                SymbolicAction::new(1, ActionKind::LandOnUSV, Robot::Uav)
                    .with_theta(ThetaParams::point(Some(Target::named(USV_DECK)), None))
                    .after([0]),
            );
        }
        let id = steps.len();
        let after: Vec<StepId> = id.checked_sub(1).into_iter().collect();
        steps.push(
            SymbolicAction::new(id, ActionKind::GoHome, Robot::Usv)
                .with_theta(ThetaParams::point(Some(Target::named(PORT_DOCK)), None))
                .after(after),
        );
        let plan = MissionPlan::new(format!("{}-safe-return", self.out.mission_id), steps);
        let graph = build_graph(&plan).expect("safe-return chain is acyclic");
        let index = self.adopt(plan);
        self.out.safe_return_plan = Some(index);
        let steps = self.out.plans[index].len();
        self.emit(Event::SafeReturn { tick: self.world.tick, plan: index, steps });
        self.tick_limit = self.tick_limit.max(self.world.tick) + SAFE_RETURN_TICKS;
        let _ = self.execute(index, &graph, false);
    }
}

/// Execute `plan` against `world` until it succeeds, fails for good or is
/// aborted. Failures are folded into the outcome, never returned as errors.
pub fn run_mission(
    request: &MissionRequest,
    plan: MissionPlan,
    world: WorldState,
    clients: &ModelClients<'_>,
    policy: &ReplanPolicy,
) -> MissionOutcome {
    let mut runner = Runner {
        out: MissionOutcome::new(&plan.mission_id, world.dt),
        tick_limit: world.tick + policy.max_ticks,
        world,
        request,
        clients,
        policy,
        hold: IdleHold::default(),
    };
    runner.out.trace.push(TraceRow::of(&runner.world));
    let start_tick = runner.world.tick;
    runner.emit(Event::MissionStart { tick: start_tick, mission_id: plan.mission_id.clone(), steps: plan.len() });

    let status = match build_graph(&plan) {
        Err(e) => {
            runner.adopt(plan);
            runner.emit(Event::ReplanFailed { tick: start_tick, error: format!("initial plan rejected: {e}") });
            MissionStatus::Failed
        }
        Ok(graph) => {
            let mut index = runner.adopt(plan);
            let mut graph = graph;
            let mut attempts = 0u32;
            loop {
                match runner.execute(index, &graph, true) {
                    RunEnd::Completed => break MissionStatus::Succeeded,
                    RunEnd::Aborted => break MissionStatus::Aborted,
                    RunEnd::OutOfTime => break MissionStatus::Failed,
                    RunEnd::Failed { step, reason } => {
                        let completed: BTreeSet<StepId> = runner
                            .out
                            .timeline
                            .iter()
                            .filter(|e| e.plan == index && e.result == StepResult::Completed)
                            .map(|e| e.step)
                            .collect();
                        let context = ReplanContext {
                            previous: runner.out.plans[index].clone(),
                            completed,
                            failed_step: Some(step),
                            reason: reason.clone(),
                        };
                        let adopted = loop {
                            let positioned = runner.carrier_positioned();
                            match replan(request, &context, clients.planner, policy, attempts, positioned) {
                                Ok(found) => {
                                    attempts += 1;
                                    break Some(found);
                                }
                                Err(PlanError::BudgetExhausted) => {
                                    let tick = runner.world.tick;
                                    runner.emit(Event::ReplanFailed { tick, error: PlanError::BudgetExhausted.to_string() });
                                    break None;
                                }
                                Err(e) => {
                                    attempts += 1;
                                    let tick = runner.world.tick;
                                    runner.emit(Event::ReplanFailed { tick, error: e.to_string() });
                                }
                            }
                        };
                        let Some((plan, g, latency)) = adopted else {
                            break MissionStatus::Failed;
                        };
                        runner.out.planner_latency += latency;
                        runner.out.replans += 1;
                        let steps = plan.len();
                        index = runner.adopt(plan);
                        graph = g;
                        let tick = runner.world.tick;
                        runner.emit(Event::Replanned { tick, plan: index, steps, reason });
                    }
                }
            }
        }
    };

    if status != MissionStatus::Succeeded {
        let last = runner.out.plans.len() - 1;
        let tick = runner.world.tick;
        let done: BTreeSet<StepId> = runner.out.timeline.iter().filter(|e| e.plan == last).map(|e| e.step).collect();
        for step in runner.out.plans[last].steps.clone() {
            if !done.contains(&step.id) {
                runner.record(last, &step, tick, tick, StepResult::Skipped);
            }
        }
        if policy.safe_return {
            runner.safe_return();
        }
    }
    runner.out.status = status;
    runner.out.end_tick = runner.world.tick;
    let tick = runner.world.tick;
    runner.emit(Event::MissionEnd { tick, status });
    runner.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::ThetaParams;

    fn plan(robots: &[(Robot, &[StepId])]) -> MissionPlan {
        let steps = robots
            .iter()
            .enumerate()
            .map(|(i, (r, pre))| {
                SymbolicAction::new(i, ActionKind::Hover, *r)
                    .with_theta(ThetaParams::with_dwell(1.0))
                    .after(pre.iter().copied())
            })
            .collect();
        MissionPlan::new("m", steps)
    }

    fn ready(p: &MissionPlan, completed: &[StepId]) -> (DependencyGraph, ExecutionState) {
        let graph = build_graph(p).unwrap();
        let mut state = ExecutionState::new(&graph);
        for &c in completed {
            state.start(&graph, c).unwrap();
            state.mark_complete(c).unwrap();
        }
        (graph, state)
    }

    #[test]
    fn one_step_per_robot() {
        use Robot::*;
        let p = plan(&[(Usv, &[]), (Usv, &[0]), (Usv, &[0]), (Uav, &[0]), (Usv, &[0]), (Uav, &[0])]);
        let (g, s) = ready(&p, &[0]);
        assert_eq!(dispatch_ready(&s, &g, &p, [false, true]), vec![3]);
        assert_eq!(dispatch_ready(&s, &g, &p, [true, true]), vec![1, 3]);
        assert_eq!(dispatch_ready(&s, &g, &p, [true, false]), vec![1]);
    }

    #[test]
    fn busy_robot_gets_nothing() {
        let p = plan(&[(Robot::Usv, &[]), (Robot::Uav, &[])]);
        let (g, s) = ready(&p, &[]);
        assert_eq!(dispatch_ready(&s, &g, &p, [true, false]), vec![0]);
        assert!(dispatch_ready(&s, &g, &p, [false, false]).is_empty());
    }

    #[test]
    fn critical_keywords_match_whole_words() {
        let kw: Vec<String> = DEFAULT_CRITICAL_KEYWORDS.iter().map(|s| s.to_string()).collect();
        assert!(is_critical("vehicle: truck on the left side of the Crane", &kw));
        assert!(is_critical("Human near the quay", &kw));
        assert!(!is_critical("boat: sailboat near the pier", &kw));
        assert!(!is_critical("firefly swarm", &kw));
    }

    #[test]
    fn precondition_checker_flags_overlap() {
        let p = plan(&[(Robot::Usv, &[]), (Robot::Uav, &[0])]);
        let entry = |step, robot, start, end| TimelineEntry {
            plan: 0,
            step,
            robot,
            action: ActionKind::Hover,
            start,
            end,
            result: StepResult::Completed,
        };
        let mut out = MissionOutcome::new("m", 0.05);
        out.plans.push(p);
        out.timeline = vec![entry(0, Robot::Usv, 0, 10), entry(1, Robot::Uav, 10, 12)];
        assert_eq!(out.precondition_violations(), vec![(0, 1)]);
        out.timeline[1].start = 11;
        assert!(out.precondition_violations().is_empty());
        out.timeline[1].robot = Robot::Usv;
        assert!(out.exclusivity_violations().is_empty());
        out.timeline[1].start = 10;
        assert_eq!(out.exclusivity_violations().len(), 1);
    }
}
