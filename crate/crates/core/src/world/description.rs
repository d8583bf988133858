use super::WorldError;
use crate::geometry::{Bounds, Point, Polygon};
use crate::plan::Knowledge;
use crate::vehicles::VehicleConfig;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const DEFAULT_WORLD: &str = include_str!("../../assets/worlds/default_port.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticObstacle {
    pub label: String,
    pub polygon: Polygon,
}

/// A stationary object the cameras can report on (truck, forklift, moored boat, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub label: String,
    pub position: Point,
    #[serde(default)]
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoverSpec {
    pub label: String,
    pub speed: f64,
    pub waypoints: Vec<Point>,
    /// Initial distance along the loop; drawn from the world seed when absent.
    #[serde(default)]
    pub phase: Option<f64>,
    #[serde(default = "default_mover_radius")]
    pub radius: f64,
}

fn default_mover_radius() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub range: f64,
    pub fov_deg: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { range: 60.0, fov_deg: 90.0 }
    }
}

impl CameraModel {
    pub fn half_fov(&self) -> f64 {
        self.fov_deg.to_radians() / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavStart {
    #[default]
    Docked,
    At([f64; 3]),
}

fn default_resolution() -> f64 {
    1.0
}

fn default_inflation() -> f64 {
    2.0
}

fn default_dt() -> f64 {
    0.05
}

/// On-disk world description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDescription {
    #[serde(default)]
    pub summary: String,
    pub bounds: Bounds,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub static_obstacles: Vec<StaticObstacle>,
    #[serde(default)]
    pub movers: Vec<MoverSpec>,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub landmarks: BTreeMap<String, Point>,
    #[serde(default)]
    pub camera: CameraModel,
    /// USV start pose: x, y, yaw.
    pub usv_start: [f64; 3],
    #[serde(default)]
    pub uav_start: UavStart,
    /// Standing operational constraints of the port.
    #[serde(default)]
    pub knowledge: Knowledge,
    #[serde(default)]
    pub vehicles: Option<VehicleConfig>,
}

impl WorldDescription {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| WorldError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn default_port() -> Self {
        Self::from_json(DEFAULT_WORLD).expect("bundled world parses")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serialization is infallible")
    }

    /// The same world shifted horizontally; bounds, obstacles, movers,
    /// entities, landmarks, zones and start positions all move together.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let offset = Vector2::new(dx, dy);
        let mut out = self.clone();
        out.bounds.min[0] += dx;
        out.bounds.max[0] += dx;
        out.bounds.min[1] += dy;
        out.bounds.max[1] += dy;
        for o in &mut out.static_obstacles {
            o.polygon = o.polygon.translated(offset);
        }
        for m in &mut out.movers {
            m.waypoints.iter_mut().for_each(|w| *w += offset);
        }
        for e in &mut out.entities {
            e.position += offset;
        }
        for p in out.landmarks.values_mut() {
            *p += offset;
        }
        for zone in out.knowledge.no_fly_zones.iter_mut().chain(out.knowledge.usv_restricted.iter_mut()) {
            zone.polygon = zone.polygon.translated(offset);
        }
        out.usv_start[0] += dx;
        out.usv_start[1] += dy;
        if let UavStart::At(p) = &mut out.uav_start {
            p[0] += dx;
            p[1] += dy;
        }
        out
    }
}
