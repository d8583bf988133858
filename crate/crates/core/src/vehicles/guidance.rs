use super::{Pid, UavCommand, UavConfig, UavState};
use crate::geometry::{wrap_angle, Point};
use nalgebra::Vector3;
use std::f64::consts::TAU;

/// Swept angle after which orbit radial error is counted as steady state.
const ORBIT_TRANSIENT: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceMode {
    Point { target: Vector3<f64> },
    Orbit360 { center: Point, radius: f64, altitude: f64 },
    Rectangle { vertices: [Point; 4], altitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceOutput {
    pub command: UavCommand,
    pub done: bool,
    pub reference: Vector3<f64>,
}

#[derive(Debug, Clone)]
enum Phase {
    /// Flying to a fixed point; `next` indexes a rectangle leg.
    Waypoint { next: usize },
    Orbit { angle: f64, swept: f64 },
}

/// Cascaded position/velocity guidance for the UAV. The outer loop turns
/// position error into a saturated velocity setpoint, the inner PID loop
/// turns velocity error into acceleration. Orbits add velocity and
/// centripetal feedforward along the moving reference.
#[derive(Debug, Clone)]
pub struct UavGuidance {
    mode: GuidanceMode,
    phase: Phase,
    velocity: [Pid; 3],
    config: UavConfig,
    max_radial_error: f64,
    done: bool,
}

impl UavGuidance {
    pub fn new(mode: GuidanceMode, config: &UavConfig) -> Self {
        Self {
            mode,
            phase: Phase::Waypoint { next: 0 },
            velocity: [Pid::new(config.velocity), Pid::new(config.velocity), Pid::new(config.velocity)],
            config: config.clone(),
            max_radial_error: 0.0,
            done: false,
        }
    }

    pub fn mode(&self) -> &GuidanceMode {
        &self.mode
    }

    /// Largest radial deviation observed after the orbit transient.
    pub fn max_radial_error(&self) -> f64 {
        self.max_radial_error
    }

    /// Swept orbit angle so far, radians; zero for other modes.
    pub fn swept(&self) -> f64 {
        match self.phase {
            Phase::Orbit { swept, .. } => swept,
            Phase::Waypoint { .. } => 0.0,
        }
    }

    fn captured(&self, state: &UavState, point: &Vector3<f64>) -> bool {
        (point - state.position).norm() < self.config.capture_radius
    }

    pub fn update(&mut self, state: &UavState, dt: f64) -> GuidanceOutput {
        let (reference, ff_velocity, ff_accel, facing) = self.reference(state, dt);
        let command = self.cascade(state, &reference, &ff_velocity, &ff_accel, facing, dt);
        GuidanceOutput { command, done: self.done, reference }
    }

    /// Current reference point, feedforward terms and desired yaw.
    fn reference(&mut self, state: &UavState, dt: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Option<f64>) {
        let zero = Vector3::zeros();
        match self.mode.clone() {
            GuidanceMode::Point { target } => {
                if self.captured(state, &target) && state.velocity.norm() < self.config.settle_speed {
                    self.done = true;
                }
                (target, zero, zero, heading_to(state, &target))
            }
            GuidanceMode::Rectangle { vertices, altitude } => {
                let Phase::Waypoint { mut next } = self.phase else { unreachable!() };
                let at = |i: usize| Vector3::new(vertices[i % 4].x, vertices[i % 4].y, altitude);
                while next < 4 && self.captured(state, &at(next)) {
                    next += 1;
                }
                if next == 4 && self.captured(state, &at(4)) {
                    self.done = true;
                }
                self.phase = Phase::Waypoint { next };
                let target = at(next);
                (target, zero, zero, heading_to(state, &target))
            }
            GuidanceMode::Orbit360 { center, radius, altitude } => {
                let center3 = Vector3::new(center.x, center.y, altitude);
                let facing = Some((center.y - state.position.y).atan2(center.x - state.position.x));
                if let Phase::Waypoint { .. } = self.phase {
                    let rel = state.horizontal() - center;
                    let angle = if rel.norm() > 1e-9 { rel.y.atan2(rel.x) } else { 0.0 };
                    let entry = center3 + radius * Vector3::new(angle.cos(), angle.sin(), 0.0);
                    if !self.captured(state, &entry) {
                        return (entry, zero, zero, facing);
                    }
                    self.phase = Phase::Orbit { angle, swept: 0.0 };
                }
                let Phase::Orbit { angle, swept } = &mut self.phase else { unreachable!() };
                if *swept >= ORBIT_TRANSIENT {
                    let radial = ((state.horizontal() - center).norm() - radius).abs();
                    self.max_radial_error = self.max_radial_error.max(radial);
                }
                let omega = if self.done { 0.0 } else { self.config.orbit_speed / radius };
                *angle += omega * dt;
                *swept += omega * dt;
                if *swept >= TAU {
                    self.done = true;
                }
                let (s, c) = angle.sin_cos();
                let reference = center3 + radius * Vector3::new(c, s, 0.0);
                let ff_velocity = radius * omega * Vector3::new(-s, c, 0.0);
                let ff_accel = -radius * omega * omega * Vector3::new(c, s, 0.0);
                (reference, ff_velocity, ff_accel, facing)
            }
        }
    }

    fn cascade(
        &mut self,
        state: &UavState,
        reference: &Vector3<f64>,
        ff_velocity: &Vector3<f64>,
        ff_accel: &Vector3<f64>,
        facing: Option<f64>,
        dt: f64,
    ) -> UavCommand {
        let error = reference - state.position;
        let mut setpoint = ff_velocity + self.config.position.kp * error;
        let horizontal = setpoint.xy().norm();
        if horizontal > self.config.horizontal_speed_max {
            let scale = self.config.horizontal_speed_max / horizontal;
            setpoint.x *= scale;
            setpoint.y *= scale;
        }
        setpoint.z = setpoint.z.clamp(-self.config.vertical_speed_max, self.config.vertical_speed_max);
        velocity_command(&mut self.velocity, &self.config, state, &setpoint, ff_accel, facing, dt)
    }
}

fn heading_to(state: &UavState, target: &Vector3<f64>) -> Option<f64> {
    let d = target.xy() - state.position.xy();
    (d.norm() > 2.0).then(|| d.y.atan2(d.x))
}

/// Inner velocity loop shared by guidance and landing.
pub(super) fn velocity_command(
    pids: &mut [Pid; 3],
    config: &UavConfig,
    state: &UavState,
    setpoint: &Vector3<f64>,
    ff_accel: &Vector3<f64>,
    facing: Option<f64>,
    dt: f64,
) -> UavCommand {
    let error = setpoint - state.velocity;
    let accel = Vector3::new(
        ff_accel.x + pids[0].update(error.x, dt),
        ff_accel.y + pids[1].update(error.y, dt),
        ff_accel.z + pids[2].update(error.z, dt),
    );
    let yaw_rate = facing.map_or(0.0, |psi| config.yaw.kp * wrap_angle(psi - state.psi));
    UavCommand { accel, yaw_rate }.saturated(config)
}
