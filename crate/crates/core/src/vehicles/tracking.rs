use super::{Pid, UsvCommand, UsvConfig, UsvState};
use crate::geometry::{wrap_angle, Point};
use nalgebra::distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub command: UsvCommand,
    /// The final waypoint is inside the capture radius.
    pub complete: bool,
    pub active: usize,
}

/// Line-of-sight waypoint follower for the USV: a yaw-rate loop on the
/// heading error to the active waypoint and a surge loop on a speed setpoint
/// derived from the remaining along-track distance.
#[derive(Debug, Clone)]
pub struct UsvTracker {
    path: Vec<Point>,
    active: usize,
    surge: Pid,
    heading: Pid,
    config: UsvConfig,
}

impl UsvTracker {
    pub fn new(path: Vec<Point>, config: &UsvConfig) -> Self {
        assert!(!path.is_empty(), "tracking needs at least one waypoint");
        Self {
            path,
            active: 0,
            surge: Pid::new(config.surge),
            heading: Pid::angular(config.heading),
            config: config.clone(),
        }
    }

    pub fn path(&self) -> &[Point] {
        &self.path
    }

    pub fn goal(&self) -> Point {
        *self.path.last().expect("path is non-empty")
    }

    /// Remaining distance along the path from `position`.
    fn remaining(&self, position: &Point) -> f64 {
        let mut total = distance(position, &self.path[self.active]);
        for pair in self.path[self.active..].windows(2) {
            total += distance(&pair[0], &pair[1]);
        }
        total
    }

    pub fn track(&mut self, state: &UsvState, dt: f64) -> TrackOutput {
        let position = state.position();
        let last = self.path.len() - 1;
        while self.active < last && distance(&position, &self.path[self.active]) < self.config.capture_radius {
            self.active += 1;
        }
        let target = self.path[self.active];
        let offset = target - position;
        if self.active == last && offset.norm() < self.config.capture_radius {
            return TrackOutput {
                command: UsvCommand::brake(state, &self.config, dt),
                complete: true,
                active: self.active,
            };
        }

        let heading_error = wrap_angle(offset.y.atan2(offset.x) - state.psi);
        let r = self.heading.update(heading_error, dt);

        let remaining = self.remaining(&position);
        let braking = (1.6 * self.config.a_max * remaining).sqrt();
        let speed = self.config.cruise_speed.min(self.config.approach_gain * remaining).min(braking);
        let v_ref = speed * heading_error.cos().max(0.0);
        let a = self.surge.update(v_ref - state.v, dt);

        TrackOutput { command: UsvCommand { a, r }.saturated(&self.config), complete: false, active: self.active }
    }
}
