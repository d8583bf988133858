//! Vehicle state, dynamics and low-level control.
//!
//! The USV is a unicycle driven by surge acceleration and yaw rate; the UAV
//! is a point-mass double integrator with an independent yaw-rate channel.
//! Both are integrated with semi-implicit Euler: rates first, then positions
//! from the updated rates.

mod config;
mod guidance;
mod landing;
mod pid;
mod tracking;

pub use config::{ConfigError, UavConfig, UsvConfig, VehicleConfig, DEFAULT_CONFIG};
pub use guidance::{GuidanceMode, GuidanceOutput, UavGuidance};
pub use landing::{LandingController, LandingError, LandingStep};
pub use pid::{Pid, PidGains};
pub use tracking::{TrackOutput, UsvTracker};

use crate::geometry::{wrap_angle, Point};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UsvState {
    pub x: f64,
    pub y: f64,
    /// Yaw, radians in (-π, π].
    pub psi: f64,
    /// Surge speed, m/s.
    pub v: f64,
}

impl UsvState {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi), v: 0.0 }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.v * self.psi.cos(), self.v * self.psi.sin(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UsvCommand {
    /// Surge acceleration, m/s².
    pub a: f64,
    /// Yaw rate, rad/s.
    pub r: f64,
}

impl UsvCommand {
    pub fn saturated(self, limits: &UsvConfig) -> Self {
        Self { a: self.a.clamp(-limits.a_max, limits.a_max), r: self.r.clamp(-limits.r_max, limits.r_max) }
    }

    /// Decelerate toward zero surge speed without turning.
    pub fn brake(state: &UsvState, limits: &UsvConfig, dt: f64) -> Self {
        Self { a: -state.v / dt, r: 0.0 }.saturated(limits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    /// Position, meters; z is altitude above the water surface.
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub psi: f64,
}

impl Default for UavState {
    fn default() -> Self {
        Self { position: Vector3::zeros(), velocity: Vector3::zeros(), psi: 0.0 }
    }
}

impl UavState {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self { position: Vector3::new(x, y, z), ..Default::default() }
    }

    pub fn horizontal(&self) -> Point {
        Point::new(self.position.x, self.position.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UavCommand {
    /// Commanded accelerations (x, y, z), m/s².
    pub accel: Vector3<f64>,
    pub yaw_rate: f64,
}

impl UavCommand {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { accel: Vector3::new(ax, ay, az), yaw_rate: 0.0 }
    }

    pub fn saturated(self, limits: &UavConfig) -> Self {
        Self {
            accel: self.accel.map(|u| u.clamp(-limits.u_max, limits.u_max)),
            yaw_rate: self.yaw_rate.clamp(-limits.yaw_rate_max, limits.yaw_rate_max),
        }
    }
}

/// One integration step of the unicycle model with speed saturation.
pub fn usv_step(state: &UsvState, cmd: &UsvCommand, dt: f64, limits: &UsvConfig) -> UsvState {
    let cmd = cmd.saturated(limits);
    let v = (state.v + cmd.a * dt).clamp(-limits.v_max, limits.v_max);
    let psi = wrap_angle(state.psi + cmd.r * dt);
    UsvState { x: state.x + v * psi.cos() * dt, y: state.y + v * psi.sin() * dt, psi, v }
}

/// One integration step of the double integrator. Altitude never drops below zero.
pub fn uav_step(state: &UavState, cmd: &UavCommand, dt: f64) -> UavState {
    let mut velocity = state.velocity + cmd.accel * dt;
    let mut position = state.position + velocity * dt;
    if position.z < 0.0 {
        position.z = 0.0;
        velocity.z = velocity.z.max(0.0);
    }
    UavState { position, velocity, psi: wrap_angle(state.psi + cmd.yaw_rate * dt) }
}
