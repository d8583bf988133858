use super::WorldState;
use crate::geometry::{wrap_angle, Point};
use crate::plan::Robot;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Entities farther than this from every landmark get no landmark relation.
const NEAR_LANDMARK: f64 = 30.0;
/// Below this horizontal distance the observer counts as over the landmark.
const OVERHEAD: f64 = 1.0;
/// Minimum height for the downward-looking part of the UAV camera cone.
const NADIR_MIN_ALTITUDE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleEntity {
    pub label: String,
    pub range: f64,
    /// Bearing relative to the observer heading, radians, positive to the left.
    pub bearing: f64,
    pub position: [f64; 3],
    /// Nearest landmark, if one is close enough to describe the entity against.
    pub landmark: Option<String>,
    /// Which side of that landmark the entity is on, as seen by the observer.
    pub side: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObservation {
    pub observer: Robot,
    pub pose: Pose,
    pub visible: Vec<VisibleEntity>,
    pub frame_id: u64,
}

impl SceneObservation {
    pub fn empty(observer: Robot, pose: Pose, frame_id: u64) -> Self {
        Self { observer, pose, visible: vec![], frame_id }
    }
}

/// Deterministic visibility query: an entity is visible iff it is within
/// camera range, inside the field of view, and the sight line crosses no
/// static footprint other than ones containing the observer or the entity.
/// An airborne UAV camera also covers a downward cone of the same half-angle.
pub fn observe(world: &WorldState, robot: Robot) -> SceneObservation {
    let scene = &world.scene;
    let pose = match robot {
        Robot::Usv => Pose { x: world.usv.x, y: world.usv.y, z: 0.0, psi: world.usv.psi },
        Robot::Uav => Pose {
            x: world.uav.position.x,
            y: world.uav.position.y,
            z: world.uav.position.z,
            psi: world.uav.psi,
        },
    };
    let airborne = robot == Robot::Uav && !world.uav_docked && pose.z >= NADIR_MIN_ALTITUDE;
    let eye = Vector3::new(pose.x, pose.y, pose.z);
    let eye2 = Point::new(pose.x, pose.y);
    let half_fov = scene.camera.half_fov();

    let candidates = scene
        .entities
        .iter()
        .map(|e| (e.label.clone(), Vector3::new(e.position.x, e.position.y, e.z)))
        .chain(world.movers.iter().map(|m| {
            let p = m.position();
            (m.label.clone(), Vector3::new(p.x, p.y, 0.0))
        }));

    let mut visible = Vec::new();
    for (label, position) in candidates {
        let delta = position - eye;
        let range = delta.norm();
        if range > scene.camera.range {
            continue;
        }
        let horizontal = delta.xy().norm();
        let bearing = if horizontal > 1e-9 { wrap_angle(delta.y.atan2(delta.x) - pose.psi) } else { 0.0 };
        let in_view = bearing.abs() <= half_fov || (airborne && horizontal.atan2(-delta.z) <= half_fov);
        if !in_view {
            continue;
        }
        let target = Point::new(position.x, position.y);
        let occluded = scene.static_obstacles.iter().any(|o| {
            !o.polygon.contains(&eye2) && !o.polygon.contains(&target) && !o.polygon.segment_crossings(&eye2, &target).is_empty()
        });
        if occluded {
            continue;
        }
        let (landmark, side) = relate(world, &eye2, &target, bearing);
        visible.push(VisibleEntity {
            label,
            range,
            bearing,
            position: [position.x, position.y, position.z],
            landmark,
            side,
        });
    }
    SceneObservation { observer: robot, pose, visible, frame_id: world.tick }
}

fn relate(world: &WorldState, eye: &Point, target: &Point, bearing: f64) -> (Option<String>, Option<Side>) {
    let nearest = world
        .scene
        .landmarks
        .iter()
        .map(|(name, p)| (name, p, (p - target).norm()))
        .filter(|(_, _, d)| *d <= NEAR_LANDMARK)
        .min_by(|a, b| a.2.total_cmp(&b.2));
    let Some((name, landmark, _)) = nearest else {
        return (None, None);
    };
    let to_landmark = landmark - eye;
    let left = if to_landmark.norm() < OVERHEAD {
        bearing > 0.0
    } else {
        let to_target = target - eye;
        to_landmark.x * to_target.y - to_landmark.y * to_target.x > 0.0
    };
    (Some(name.clone()), Some(if left { Side::Left } else { Side::Right }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{UavStart, WorldDescription};

    fn world_with_uav(x: f64, y: f64, z: f64, psi: f64) -> WorldState {
        let mut desc = WorldDescription::default_port();
        desc.uav_start = UavStart::At([x, y, z]);
        let mut world = WorldState::from_description(&desc).unwrap();
        world.uav.psi = psi;
        world
    }

    #[test]
    fn truck_visible_from_above_crane() {
        let world = world_with_uav(120.0, 117.0, 15.0, 1.0);
        let obs = observe(&world, Robot::Uav);
        let truck = obs.visible.iter().find(|e| e.label == "truck").expect("truck visible");
        assert_eq!(truck.landmark.as_deref(), Some("Crane"));
    }

    #[test]
    fn entity_behind_observer_is_absent() {
        let mut world = WorldState::default_port();
        world.usv.x = 100.0;
        world.usv.y = 100.0;
        world.usv.psi = -std::f64::consts::FRAC_PI_2;
        assert!(!observe(&world, Robot::Usv).visible.iter().any(|e| e.label == "truck"));
        world.usv.psi = std::f64::consts::FRAC_PI_2;
        assert!(observe(&world, Robot::Usv).visible.iter().any(|e| e.label == "truck"));
    }

    #[test]
    fn building_blocks_line_of_sight() {
        // Forklift sits west of the container block; from the east the block is in the way.
        let world = world_with_uav(190.0, 128.0, 20.0, std::f64::consts::PI);
        let obs = observe(&world, Robot::Uav);
        assert!(!obs.visible.iter().any(|e| e.label == "forklift"));
        assert!(obs.visible.iter().any(|e| e.label == "worker"));
    }
}
