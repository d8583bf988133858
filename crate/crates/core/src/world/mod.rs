//! The bounded port environment: static footprints, scripted movers,
//! landmarks, the occupancy grid and the tick-stepped simulation clock.

mod description;
mod grid;
mod observe;

pub use description::{CameraModel, Entity, MoverSpec, StaticObstacle, UavStart, WorldDescription, DEFAULT_WORLD};
pub use grid::{build_grid, Cell, GridError, OccupancyGrid};
pub use observe::{observe, Pose, SceneObservation, Side, VisibleEntity};

use crate::geometry::{Bounds, Point};
use crate::plan::{EnvDescription, Knowledge, Robot};
use crate::vehicles::{uav_step, usv_step, UavCommand, UavState, UsvCommand, UsvState, VehicleConfig};
use nalgebra::{distance, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read world file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed world description: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("obstacle {0} has a vertex outside the world bounds")]
    ObstacleOutOfBounds(String),
    #[error("USV start {0:?} is outside the bounds or inside an inflated obstacle")]
    InvalidStart(Point),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("mover {0} needs at least one waypoint and a non-negative speed")]
    BadMover(String),
    #[error(transparent)]
    Config(#[from] crate::vehicles::ConfigError),
}

/// Immutable part of the world, shared between successive states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub summary: String,
    pub bounds: Bounds,
    pub static_obstacles: Vec<StaticObstacle>,
    pub entities: Vec<Entity>,
    pub landmarks: BTreeMap<String, Point>,
    pub camera: CameraModel,
    pub knowledge: Knowledge,
    pub vehicles: VehicleConfig,
    #[serde(skip)]
    pub grid: OccupancyGrid,
}

/// A scripted obstacle moving at constant speed around a closed waypoint loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mover {
    pub label: String,
    pub waypoints: Vec<Point>,
    pub speed: f64,
    /// Footprint radius, meters.
    pub radius: f64,
    segment: usize,
    offset: f64,
}

impl Mover {
    fn new(spec: &MoverSpec, start_distance: f64) -> Self {
        let mut mover = Self {
            label: spec.label.clone(),
            waypoints: spec.waypoints.clone(),
            speed: spec.speed,
            radius: spec.radius,
            segment: 0,
            offset: 0.0,
        };
        mover.travel(start_distance);
        mover
    }

    pub fn loop_length(&self) -> f64 {
        let n = self.waypoints.len();
        (0..n).map(|i| distance(&self.waypoints[i], &self.waypoints[(i + 1) % n])).sum()
    }

    pub fn position(&self) -> Point {
        let n = self.waypoints.len();
        let a = self.waypoints[self.segment];
        let b = self.waypoints[(self.segment + 1) % n];
        let len = distance(&a, &b);
        if len <= 0.0 {
            a
        } else {
            a + (b - a) * (self.offset / len)
        }
    }

    fn travel(&mut self, mut remaining: f64) {
        let n = self.waypoints.len();
        if n < 2 || self.loop_length() <= 0.0 {
            return;
        }
        remaining %= self.loop_length();
        loop {
            let len = distance(&self.waypoints[self.segment], &self.waypoints[(self.segment + 1) % n]);
            if self.offset + remaining < len {
                self.offset += remaining;
                return;
            }
            remaining -= len - self.offset;
            self.offset = 0.0;
            self.segment = (self.segment + 1) % n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum WorldEvent {
    /// A vehicle tried to leave the bounds and was clamped back in.
    BoundaryViolation { robot: Robot, tick: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub scene: Arc<Scene>,
    pub movers: Vec<Mover>,
    pub usv: UsvState,
    pub uav: UavState,
    /// While docked the UAV rides on the USV deck.
    pub uav_docked: bool,
    pub tick: u64,
    pub dt: f64,
    pub rng_seed: u64,
    /// Events raised by the step that produced this state.
    pub events: Vec<WorldEvent>,
}

impl WorldState {
    pub fn from_description(desc: &WorldDescription) -> Result<Self, WorldError> {
        if !(desc.dt > 0.0) {
            return Err(WorldError::BadTimeStep(desc.dt));
        }
        for obstacle in &desc.static_obstacles {
            if !obstacle.polygon.vertices.iter().all(|v| desc.bounds.contains_xy(v)) {
                return Err(WorldError::ObstacleOutOfBounds(obstacle.label.clone()));
            }
        }
        let polygons: Vec<_> = desc.static_obstacles.iter().map(|o| o.polygon.clone()).collect();
        let grid = build_grid(&polygons, &desc.bounds, desc.resolution, desc.inflation)?;
        let start = Point::new(desc.usv_start[0], desc.usv_start[1]);
        if grid.is_blocked(&start) {
            return Err(WorldError::InvalidStart(start));
        }
        let vehicles = desc.vehicles.clone().unwrap_or_default();
        vehicles.check()?;

        let mut rng = ChaCha8Rng::seed_from_u64(desc.seed);
        let mut movers = Vec::new();
        for spec in &desc.movers {
            if spec.waypoints.is_empty() || !(spec.speed >= 0.0) {
                return Err(WorldError::BadMover(spec.label.clone()));
            }
            let draw: f64 = rng.random();
            let mut mover = Mover::new(spec, 0.0);
            let phase = spec.phase.unwrap_or(draw * mover.loop_length());
            mover.travel(phase);
            movers.push(mover);
        }

        let usv = UsvState::new(start.x, start.y, desc.usv_start[2]);
        let (uav, uav_docked) = match desc.uav_start {
            UavStart::Docked => (docked_pose(&usv, vehicles.usv.deck_height), true),
            UavStart::At(p) => (UavState::at(p[0], p[1], p[2]), false),
        };
        let scene = Scene {
            summary: desc.summary.clone(),
            bounds: desc.bounds,
            static_obstacles: desc.static_obstacles.clone(),
            entities: desc.entities.clone(),
            landmarks: desc.landmarks.clone(),
            camera: desc.camera,
            knowledge: desc.knowledge.clone(),
            vehicles,
            grid,
        };
        Ok(Self { scene: Arc::new(scene), movers, usv, uav, uav_docked, tick: 0, dt: desc.dt, rng_seed: desc.seed, events: vec![] })
    }

    pub fn default_port() -> Self {
        Self::from_description(&WorldDescription::default_port()).expect("bundled world is valid")
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.scene.grid
    }

    pub fn config(&self) -> &VehicleConfig {
        &self.scene.vehicles
    }

    pub fn landmark(&self, name: &str) -> Option<Point> {
        self.scene.landmarks.get(name).copied()
    }

    /// Time in seconds at the current tick.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    /// Environment summary handed to the planner.
    pub fn env_description(&self) -> EnvDescription {
        EnvDescription {
            summary: self.scene.summary.clone(),
            bounds: self.scene.bounds,
            landmarks: self.scene.landmarks.clone(),
        }
    }

    pub fn with_uav_docked(mut self, docked: bool) -> Self {
        self.uav_docked = docked;
        if docked {
            self.uav = docked_pose(&self.usv, self.scene.vehicles.usv.deck_height);
        }
        self
    }

    /// Advance movers and both vehicles by one tick.
    pub fn step(&self, usv_cmd: &UsvCommand, uav_cmd: &UavCommand) -> WorldState {
        let mut next = self.clone();
        next.tick += 1;
        next.events.clear();
        for mover in &mut next.movers {
            mover.travel(mover.speed * self.dt);
        }
        let bounds = &self.scene.bounds;
        let config = &self.scene.vehicles;

        next.usv = usv_step(&self.usv, usv_cmd, self.dt, &config.usv);
        let clamped = bounds.clamp_xy(next.usv.position());
        if clamped != next.usv.position() {
            next.usv.x = clamped.x;
            next.usv.y = clamped.y;
            next.usv.v = 0.0;
            next.events.push(WorldEvent::BoundaryViolation { robot: Robot::Usv, tick: next.tick });
        }

        if self.uav_docked {
            next.uav = docked_pose(&next.usv, config.usv.deck_height);
        } else {
            let mut uav = uav_step(&self.uav, &uav_cmd.saturated(&config.uav), self.dt);
            let mut violated = false;
            for axis in 0..3 {
                let v = uav.position[axis];
                let c = v.clamp(bounds.min[axis], bounds.max[axis]);
                if c != v {
                    uav.position[axis] = c;
                    uav.velocity[axis] = 0.0;
                    violated = true;
                }
            }
            if violated {
                next.events.push(WorldEvent::BoundaryViolation { robot: Robot::Uav, tick: next.tick });
            }
            next.uav = uav;
        }
        next
    }

    pub fn observe(&self, robot: Robot) -> SceneObservation {
        observe(self, robot)
    }

    pub fn robot_position(&self, robot: Robot) -> Vector3<f64> {
        match robot {
            Robot::Usv => Vector3::new(self.usv.x, self.usv.y, 0.0),
            Robot::Uav => self.uav.position,
        }
    }
}

fn docked_pose(usv: &UsvState, deck_height: f64) -> UavState {
    UavState { position: Vector3::new(usv.x, usv.y, deck_height), velocity: usv.velocity(), psi: usv.psi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_commands_only_advance_tick() {
        let mut desc = WorldDescription::default_port();
        desc.movers.clear();
        let world = WorldState::from_description(&desc).unwrap();
        let next = world.step(&UsvCommand::default(), &UavCommand::default());
        assert_eq!(next.tick, 1);
        assert_eq!(WorldState { tick: 0, ..next }, world);
    }

    #[test]
    fn mover_advances_by_speed_times_dt() {
        let spec = MoverSpec {
            label: "boat".into(),
            speed: 1.0,
            waypoints: vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0)],
            phase: Some(0.0),
            radius: 3.0,
        };
        let mut mover = Mover::new(&spec, 0.0);
        mover.travel(spec.speed * 0.05);
        assert!((mover.position() - Point::new(0.05, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn docked_uav_rides_with_usv() {
        let world = WorldState::default_port();
        assert!(world.uav_docked);
        let mut w = world.clone();
        for _ in 0..40 {
            w = w.step(&UsvCommand { a: 1.0, r: 0.0 }, &UavCommand::new(2.0, 2.0, 2.0));
        }
        assert_eq!(w.uav.horizontal(), w.usv.position());
        assert_eq!(w.uav.position.z, world.config().usv.deck_height);
    }

    #[test]
    fn boundary_clamp_raises_event() {
        let mut desc = WorldDescription::default_port();
        desc.uav_start = UavStart::At([0.05, 50.0, 10.0]);
        let world = WorldState::from_description(&desc).unwrap();
        let mut next = world;
        while next.events.is_empty() {
            next = next.step(&UsvCommand::default(), &UavCommand::new(-2.0, 0.0, 0.0));
            assert!(next.tick < 100);
        }
        assert_eq!(next.uav.position.x, 0.0);
        assert!(matches!(next.events[..], [WorldEvent::BoundaryViolation { robot: Robot::Uav, .. }]));
    }
}
