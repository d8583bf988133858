//! Per-action executors. Each executor turns one plan step into a stream of
//! vehicle commands and reports when the step has finished. Executors never
//! touch the world directly; side effects (undocking, captures, ...) are
//! handed back to the coordinator as [`Effect`]s.

use crate::geometry::{wrap_angle, Point};
use crate::nav::{plan_path, NavError, PROXIMITY_HORIZON};
use crate::plan::{ActionKind, Robot, StepId, SymbolicAction, Target, ThetaParams, HOVER_ABOVE_USV, PORT_DOCK, USV_DECK};
use crate::vehicles::{
    GuidanceMode, LandingController, LandingStep, UavCommand, UavGuidance, UsvCommand, UsvTracker,
};
use crate::world::{SceneObservation, VisibleEntity, WorldState};
use nalgebra::{distance, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default altitude of the hover point above the USV before landing, meters.
pub const HOVER_ABOVE_USV_ALTITUDE: f64 = 10.0;
/// Default hover dwell, seconds.
pub const DEFAULT_DWELL: f64 = 1.0;
/// Proximity weight used for USV route planning.
pub const ROUTE_PROXIMITY_WEIGHT: f64 = 2.0;
/// Ticks between mover-corridor checks while navigating.
const CORRIDOR_CHECK_TICKS: u64 = 20;
/// Lookahead along the remaining route for mover-corridor checks, meters.
const CORRIDOR_LOOKAHEAD: f64 = 30.0;
/// Ticks between captures while inspecting along a survey pattern.
const SURVEY_CAPTURE_TICKS: u64 = 40;
/// Heading tolerance before an inspection capture, radians.
const AIM_TOLERANCE: f64 = 0.1;
/// Ticks a landing waits for the carrier to stop before giving up.
const CARRIER_WAIT_TICKS: u64 = 600;
/// Slack added to every step's time budget, seconds.
const TIME_SLACK: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExecFailure {
    UnknownTarget { name: String },
    NoPath { detail: String },
    UavDocked,
    UavNotDocked,
    CarrierMoving,
    Timeout { ticks: u64 },
    Injected,
    Cancelled,
    InspectorUnavailable { detail: String },
}

impl fmt::Display for ExecFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecFailure::UnknownTarget { name } => write!(f, "unknown target {name}"),
            ExecFailure::NoPath { detail } => write!(f, "no route: {detail}"),
            ExecFailure::UavDocked => write!(f, "UAV is docked"),
            ExecFailure::UavNotDocked => write!(f, "UAV is not docked"),
            ExecFailure::CarrierMoving => write!(f, "carrier kept moving"),
            ExecFailure::Timeout { ticks } => write!(f, "timed out after {ticks} ticks"),
            ExecFailure::Injected => write!(f, "injected fault"),
            ExecFailure::Cancelled => write!(f, "cancelled"),
            ExecFailure::InspectorUnavailable { detail } => write!(f, "inspector unavailable: {detail}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecStatus {
    Running,
    Succeeded,
    Failed(ExecFailure),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobotCommand {
    Usv(UsvCommand),
    Uav(UavCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Undock,
    Dock,
    Capture(SceneObservation),
    StartRecording(Robot),
    FlushReports(Robot),
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Task {
    Route {
        goal: Point,
        tracker: UsvTracker,
        last_check: u64,
        /// Capture an observation on arrival (USV surveys).
        capture: bool,
    },
    Climb {
        altitude: f64,
        guidance: Option<UavGuidance>,
    },
    Fly {
        guidance: UavGuidance,
    },
    Land {
        controller: LandingController,
        waited: u64,
    },
    Dwell {
        ticks: u64,
        elapsed: u64,
        hold: Option<UavGuidance>,
    },
    Inspect {
        aim: Option<Point>,
        hold: Option<UavGuidance>,
        survey: Option<UavGuidance>,
        frames: Vec<SceneObservation>,
        captured: Option<SceneObservation>,
    },
    Instant(Effect),
}

/// Running state of one dispatched plan step.
#[derive(Debug, Clone)]
pub struct Executor {
    pub step: StepId,
    pub robot: Robot,
    pub action: ActionKind,
    task: Task,
    started: u64,
    budget: u64,
    effects: Vec<Effect>,
    done: bool,
}

fn resolve_point(target: &Target, world: &WorldState) -> Result<Point, ExecFailure> {
    match target {
        Target::Coords(p) => Ok(*p),
        Target::Named(name) if name == USV_DECK || name == HOVER_ABOVE_USV => Ok(world.usv.position()),
        Target::Named(name) => world.landmark(name).ok_or_else(|| ExecFailure::UnknownTarget { name: name.clone() }),
    }
}

fn uav_hold(world: &WorldState) -> UavGuidance {
    UavGuidance::new(GuidanceMode::Point { target: world.uav.position }, &world.config().uav)
}

fn budget_ticks(world: &WorldState, distance: f64, speed: f64) -> u64 {
    ((distance / speed + TIME_SLACK) / world.dt).ceil() as u64
}

/// Route from the USV position, nudging the start to the nearest free cell
/// when the vessel has drifted into an inflated margin.
fn route(world: &WorldState, goal: &Point, with_movers: bool) -> Result<Vec<Point>, ExecFailure> {
    let grid = if with_movers {
        let discs: Vec<_> = world.movers.iter().map(|m| (m.position(), m.radius)).collect();
        world.grid().with_discs(&discs)
    } else {
        world.grid().clone()
    };
    let start = world.usv.position();
    let result = plan_path(&grid, &start, goal, ROUTE_PROXIMITY_WEIGHT).or_else(|e| match e {
        NavError::StartOccupied => {
            let free = nearest_free(&grid, &start).ok_or(NavError::StartOccupied)?;
            plan_path(&grid, &free, goal, ROUTE_PROXIMITY_WEIGHT)
        }
        e => Err(e),
    });
    result.map(|p| p.waypoints).map_err(|e| ExecFailure::NoPath { detail: e.to_string() })
}

fn nearest_free(grid: &crate::world::OccupancyGrid, p: &Point) -> Option<Point> {
    let (ci, cj) = (((p.x - grid.origin.x) / grid.resolution).floor() as i64, ((p.y - grid.origin.y) / grid.resolution).floor() as i64);
    for r in 1..=6i64 {
        let mut best: Option<(f64, Point)> = None;
        for dj in -r..=r {
            for di in -r..=r {
                let (i, j) = (ci + di, cj + dj);
                if grid.in_grid(i, j) && !grid.is_occupied((i as usize, j as usize)) {
                    let c = grid.cell_center((i as usize, j as usize));
                    let d = distance(&c, p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
        }
        if let Some((_, c)) = best {
            return Some(c);
        }
    }
    None
}

impl Executor {
    /// Prepare a step for execution against the current world.
    pub fn start(step: &SymbolicAction, world: &WorldState) -> Result<Self, ExecFailure> {
        let robot = step.robot;
        let uav_cfg = &world.config().uav;
        let usv_cfg = &world.config().usv;
        let default_budget = budget_ticks(world, 0.0, 1.0);
        let (task, budget) = match step.action {
            ActionKind::Navigate | ActionKind::Dock | ActionKind::GoHome => {
                let target = match step.theta.target() {
                    Some(t) => t.clone(),
                    None if step.action != ActionKind::Navigate => Target::named(PORT_DOCK),
                    None => return Err(ExecFailure::UnknownTarget { name: "(none)".into() }),
                };
                let goal = resolve_point(&target, world)?;
                let path = route(world, &goal, false)?;
                let length: f64 = path.windows(2).map(|w| distance(&w[0], &w[1])).sum::<f64>()
                    + distance(&world.usv.position(), &path[0]);
                let budget = budget_ticks(world, length, 1.0);
                let tracker = UsvTracker::new(path, usv_cfg);
                (Task::Route { goal, tracker, last_check: world.tick, capture: false }, budget)
            }
            ActionKind::Survey if robot == Robot::Usv => {
                let path = match &step.theta {
                    ThetaParams::Rectangle { vertices, .. } => {
                        let mut v = vertices.to_vec();
                        v.push(vertices[0]);
                        v
                    }
                    ThetaParams::Orbit360 { center, radius, .. } => {
                        let c = resolve_point(center, world)?;
                        let mut v = crate::geometry::circle_points(&c, *radius, 12);
                        v.push(v[0]);
                        v
                    }
                    ThetaParams::Point { target, .. } => {
                        let t = target.as_ref().ok_or(ExecFailure::UnknownTarget { name: "(none)".into() })?;
                        route(world, &resolve_point(t, world)?, false)?
                    }
                };
                let goal = *path.last().expect("survey path is non-empty");
                let length: f64 = path.windows(2).map(|w| distance(&w[0], &w[1])).sum::<f64>()
                    + distance(&world.usv.position(), &path[0]);
                let tracker = UsvTracker::new(path, usv_cfg);
                (Task::Route { goal, tracker, last_check: u64::MAX, capture: true }, budget_ticks(world, length, 1.0))
            }
            ActionKind::Survey => {
                if world.uav_docked {
                    return Err(ExecFailure::UavDocked);
                }
                let mode = match survey_mode(&step.theta, world)? {
                    Some(m) => m,
                    None => {
                        let t = step.theta.target().ok_or(ExecFailure::UnknownTarget { name: "(none)".into() })?;
                        let p = resolve_point(t, world)?;
                        let z = step.theta.altitude().unwrap_or(world.uav.position.z.max(uav_cfg.takeoff_altitude));
                        GuidanceMode::Point { target: Vector3::new(p.x, p.y, z) }
                    }
                };
                let budget = budget_ticks(world, mode_length(&mode, world), 1.0);
                let survey = Some(UavGuidance::new(mode, uav_cfg));
                (Task::Inspect { aim: None, hold: None, survey, frames: Vec::new(), captured: None }, budget)
            }
            ActionKind::Takeoff => {
                if !world.uav_docked {
                    return Err(ExecFailure::UavNotDocked);
                }
                let altitude = step.theta.altitude().unwrap_or(uav_cfg.takeoff_altitude);
                (Task::Climb { altitude, guidance: None }, budget_ticks(world, altitude, 1.0))
            }
            ActionKind::FlyTo => {
                if world.uav_docked {
                    return Err(ExecFailure::UavDocked);
                }
                let mode = survey_mode(&step.theta, world)?.map_or_else(
                    || -> Result<GuidanceMode, ExecFailure> {
                        let target = step.theta.target().ok_or(ExecFailure::UnknownTarget { name: "(none)".into() })?;
                        let p = resolve_point(target, world)?;
                        let default_alt = if target.is_named(HOVER_ABOVE_USV) {
                            HOVER_ABOVE_USV_ALTITUDE
                        } else if world.uav.position.z < 2.0 {
                            uav_cfg.takeoff_altitude
                        } else {
                            world.uav.position.z
                        };
                        let z = step.theta.altitude().unwrap_or(default_alt);
                        Ok(GuidanceMode::Point { target: Vector3::new(p.x, p.y, z) })
                    },
                    Ok,
                )?;
                let budget = budget_ticks(world, mode_length(&mode, world), 1.0);
                (Task::Fly { guidance: UavGuidance::new(mode, uav_cfg) }, budget)
            }
            ActionKind::LandOnUSV => {
                if world.uav_docked {
                    return Err(ExecFailure::UavDocked);
                }
                let height = world.uav.position.z;
                let budget = budget_ticks(world, height * 2.0 + 20.0, uav_cfg.descent_rate) + CARRIER_WAIT_TICKS;
                (Task::Land { controller: LandingController::new(uav_cfg, usv_cfg), waited: 0 }, budget)
            }
            ActionKind::Hover => {
                let seconds = step.theta.dwell().unwrap_or(DEFAULT_DWELL).max(0.0);
                let ticks = (seconds / world.dt).round() as u64;
                let hold = (robot == Robot::Uav && !world.uav_docked).then(|| uav_hold(world));
                (Task::Dwell { ticks, elapsed: 0, hold }, ticks + default_budget)
            }
            ActionKind::Inspect => {
                if robot == Robot::Uav && world.uav_docked {
                    return Err(ExecFailure::UavDocked);
                }
                let survey = survey_mode(&step.theta, world)?;
                let budget = survey.as_ref().map_or(default_budget, |m| budget_ticks(world, mode_length(m, world), 1.0));
                let aim = match step.theta.target() {
                    Some(t) if survey.is_none() => Some(resolve_point(t, world)?),
                    _ => None,
                };
                let hold = (robot == Robot::Uav && survey.is_none()).then(|| uav_hold(world));
                let survey = survey.map(|m| UavGuidance::new(m, uav_cfg));
                (Task::Inspect { aim, hold, survey, frames: Vec::new(), captured: None }, budget)
            }
            ActionKind::Record => (Task::Instant(Effect::StartRecording(robot)), default_budget),
            ActionKind::Report => (Task::Instant(Effect::FlushReports(robot)), default_budget),
        };
        Ok(Self { step: step.id, robot, action: step.action, task, started: world.tick, budget, effects: vec![], done: false })
    }

    /// Command for this tick, computed from the current world state.
    pub fn command(&mut self, world: &WorldState) -> RobotCommand {
        let dt = world.dt;
        let usv_cfg = &world.config().usv;
        let hold_usv = RobotCommand::Usv(UsvCommand::brake(&world.usv, usv_cfg, dt));
        let idle = match self.robot {
            Robot::Usv => hold_usv,
            Robot::Uav => RobotCommand::Uav(UavCommand::default()),
        };
        match &mut self.task {
            Task::Route { goal, tracker, last_check, .. } => {
                if world.tick >= last_check.saturating_add(CORRIDOR_CHECK_TICKS) {
                    *last_check = world.tick;
                    if mover_in_corridor(world, tracker) {
                        if let Ok(path) = route(world, goal, true) {
                            *tracker = UsvTracker::new(path, usv_cfg);
                        }
                    }
                }
                let out = tracker.track(&world.usv, dt);
                RobotCommand::Usv(out.command)
            }
            Task::Climb { altitude, guidance } => {
                if world.uav_docked {
                    if world.usv.v.abs() > usv_cfg.stationary_speed {
                        return idle;
                    }
                    self.effects.push(Effect::Undock);
                }
                let g = guidance.get_or_insert_with(|| {
                    let p = world.uav.position;
                    UavGuidance::new(GuidanceMode::Point { target: Vector3::new(p.x, p.y, *altitude) }, &world.config().uav)
                });
                RobotCommand::Uav(g.update(&world.uav, dt).command)
            }
            Task::Fly { guidance } => RobotCommand::Uav(guidance.update(&world.uav, dt).command),
            Task::Land { controller, waited } => match controller.update(&world.uav, &world.usv, dt) {
                Ok(LandingStep::Command(cmd)) => RobotCommand::Uav(cmd),
                Ok(LandingStep::Landed) => RobotCommand::Uav(UavCommand::default()),
                Err(_) => {
                    *waited += 1;
                    RobotCommand::Uav(uav_hold(world).update(&world.uav, dt).command)
                }
            },
            Task::Dwell { hold, .. } => match hold {
                Some(g) => RobotCommand::Uav(g.update(&world.uav, dt).command),
                None => idle,
            },
            Task::Inspect { aim, hold, survey, .. } => {
                if let Some(g) = survey {
                    return RobotCommand::Uav(g.update(&world.uav, dt).command);
                }
                let (position, psi) = match self.robot {
                    Robot::Usv => (world.usv.position(), world.usv.psi),
                    Robot::Uav => (world.uav.horizontal(), world.uav.psi),
                };
                let yaw_error = aim
                    .filter(|a| distance(a, &position) > 2.0)
                    .map_or(0.0, |a| wrap_angle((a.y - position.y).atan2(a.x - position.x) - psi));
                match self.robot {
                    Robot::Usv => {
                        let mut cmd = UsvCommand::brake(&world.usv, usv_cfg, dt);
                        cmd.r = (world.config().usv.heading.kp * yaw_error).clamp(-usv_cfg.r_max, usv_cfg.r_max);
                        RobotCommand::Usv(cmd)
                    }
                    Robot::Uav => {
                        let g = hold.get_or_insert_with(|| uav_hold(world));
                        let mut cmd = g.update(&world.uav, dt).command;
                        let cfg = &world.config().uav;
                        cmd.yaw_rate = (cfg.yaw.kp * yaw_error).clamp(-cfg.yaw_rate_max, cfg.yaw_rate_max);
                        RobotCommand::Uav(cmd)
                    }
                }
            }
            Task::Instant(_) => idle,
        }
    }

    /// Check for completion against the state after this tick's world step.
    pub fn poll(&mut self, world: &WorldState) -> ExecStatus {
        if self.done {
            return ExecStatus::Succeeded;
        }
        let elapsed = world.tick.saturating_sub(self.started);
        let usv_cfg = &world.config().usv;
        let uav_cfg = &world.config().uav;
        let finished = match &mut self.task {
            Task::Route { tracker, capture, .. } => {
                let arrived = distance(&world.usv.position(), &tracker.goal()) < usv_cfg.capture_radius
                    && world.usv.v.abs() < usv_cfg.stationary_speed;
                if arrived && *capture {
                    self.effects.push(Effect::Capture(world.observe(Robot::Usv)));
                }
                arrived
            }
            Task::Climb { altitude, guidance } => {
                guidance.is_some()
                    && !world.uav_docked
                    && (world.uav.position.z - *altitude).abs() < uav_cfg.capture_radius
                    && world.uav.velocity.norm() < uav_cfg.settle_speed
            }
            Task::Fly { guidance } => guidance.update(&world.uav, world.dt).done,
            Task::Land { controller, waited } => {
                if *waited > CARRIER_WAIT_TICKS {
                    return ExecStatus::Failed(ExecFailure::CarrierMoving);
                }
                let landed = matches!(controller.clone().update(&world.uav, &world.usv, world.dt), Ok(LandingStep::Landed));
                if landed {
                    self.effects.push(Effect::Dock);
                }
                landed
            }
            Task::Dwell { ticks, elapsed: dwell, .. } => {
                *dwell += 1;
                *dwell >= *ticks
            }
            Task::Inspect { aim, survey, frames, captured, .. } => {
                let observation = world.observe(self.robot);
                match survey {
                    Some(g) => {
                        if elapsed.is_multiple_of(SURVEY_CAPTURE_TICKS) {
                            frames.push(observation.clone());
                        }
                        if g.clone().update(&world.uav, world.dt).done {
                            frames.push(observation);
                            *captured = Some(merge_frames(frames));
                            true
                        } else {
                            false
                        }
                    }
                    None => {
                        let (position, psi) = match self.robot {
                            Robot::Usv => (world.usv.position(), world.usv.psi),
                            Robot::Uav => (world.uav.horizontal(), world.uav.psi),
                        };
                        let aligned = aim.filter(|a| distance(a, &position) > 2.0).is_none_or(|a| {
                            wrap_angle((a.y - position.y).atan2(a.x - position.x) - psi).abs() < AIM_TOLERANCE
                        });
                        let settled = match self.robot {
                            Robot::Usv => world.usv.v.abs() < usv_cfg.stationary_speed,
                            Robot::Uav => world.uav.velocity.norm() < uav_cfg.settle_speed,
                        };
                        if aligned && settled {
                            *captured = Some(observation);
                        }
                        aligned && settled
                    }
                }
            }
            Task::Instant(effect) => {
                self.effects.push(effect.clone());
                true
            }
        };
        if let Task::Inspect { captured: Some(obs), .. } = &self.task {
            if finished {
                self.effects.push(Effect::Capture(obs.clone()));
            }
        }
        if finished {
            self.done = true;
            ExecStatus::Succeeded
        } else if elapsed >= self.budget {
            ExecStatus::Failed(ExecFailure::Timeout { ticks: elapsed })
        } else {
            ExecStatus::Running
        }
    }

    pub fn take_effects(&mut self) -> Vec<Effect> {
        std::mem::take(&mut self.effects)
    }
}

fn survey_mode(theta: &ThetaParams, world: &WorldState) -> Result<Option<GuidanceMode>, ExecFailure> {
    Ok(match theta {
        ThetaParams::Point { .. } => None,
        ThetaParams::Orbit360 { center, radius, altitude } => {
            Some(GuidanceMode::Orbit360 { center: resolve_point(center, world)?, radius: *radius, altitude: *altitude })
        }
        ThetaParams::Rectangle { vertices, altitude } => {
            Some(GuidanceMode::Rectangle { vertices: *vertices, altitude: *altitude })
        }
    })
}

fn mode_length(mode: &GuidanceMode, world: &WorldState) -> f64 {
    let here = world.uav.position;
    match mode {
        GuidanceMode::Point { target } => (target - here).norm(),
        GuidanceMode::Orbit360 { center, radius, altitude } => {
            (Vector3::new(center.x, center.y, *altitude) - here).norm() + radius + std::f64::consts::TAU * radius
        }
        GuidanceMode::Rectangle { vertices, altitude } => {
            let entry = (Vector3::new(vertices[0].x, vertices[0].y, *altitude) - here).norm();
            entry + (0..4).map(|i| distance(&vertices[i], &vertices[(i + 1) % 4])).sum::<f64>() * 2.0
        }
    }
}

/// Whether a mover footprint, inflated like static obstacles, overlaps the
/// next stretch of the tracked route.
fn mover_in_corridor(world: &WorldState, tracker: &UsvTracker) -> bool {
    let clearance = world.grid().inflation + PROXIMITY_HORIZON;
    let mut points = vec![world.usv.position()];
    points.extend_from_slice(tracker.path());
    let mut budget = CORRIDOR_LOOKAHEAD;
    for w in points.windows(2) {
        if budget <= 0.0 {
            break;
        }
        let len = distance(&w[0], &w[1]);
        let end = if len > budget { w[0] + (w[1] - w[0]) * (budget / len) } else { w[1] };
        budget -= len;
        for m in &world.movers {
            if crate::geometry::point_segment_distance(&m.position(), &w[0], &end) < m.radius + clearance {
                return true;
            }
        }
    }
    false
}

/// Union of frames, keeping the closest sighting of each entity.
fn merge_frames(frames: &[SceneObservation]) -> SceneObservation {
    let mut merged = frames.last().expect("at least one frame").clone();
    let mut seen: Vec<VisibleEntity> = Vec::new();
    for frame in frames {
        for e in &frame.visible {
            match seen.iter_mut().find(|s| s.label == e.label && same_spot(s, e)) {
                Some(s) if e.range < s.range => *s = e.clone(),
                Some(_) => {}
                None => seen.push(e.clone()),
            }
        }
    }
    merged.visible = seen;
    merged
}

fn same_spot(a: &VisibleEntity, b: &VisibleEntity) -> bool {
    let d = Vector3::from(a.position) - Vector3::from(b.position);
    d.norm() < 2.0
}

/// Keeps an idle robot in place: the USV brakes, an airborne UAV holds its position.
#[derive(Debug, Clone, Default)]
pub struct IdleHold {
    uav: Option<UavGuidance>,
}

impl IdleHold {
    pub fn reset(&mut self) {
        self.uav = None;
    }

    pub fn usv(&self, world: &WorldState) -> UsvCommand {
        UsvCommand::brake(&world.usv, &world.config().usv, world.dt)
    }

    pub fn uav(&mut self, world: &WorldState) -> UavCommand {
        if world.uav_docked {
            self.uav = None;
            return UavCommand::default();
        }
        self.uav.get_or_insert_with(|| uav_hold(world)).update(&world.uav, world.dt).command
    }
}
