use super::guidance::velocity_command;
use super::{Pid, UavCommand, UavConfig, UavState, UsvConfig, UsvState};
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LandingError {
    #[error("carrier is moving at {speed:.2} m/s")]
    CarrierMoving { speed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandingStep {
    Command(UavCommand),
    Landed,
}

/// Align over the deck, descend at a capped rate, touch down.
#[derive(Debug, Clone)]
pub struct LandingController {
    velocity: [Pid; 3],
    uav: UavConfig,
    usv: UsvConfig,
}

impl LandingController {
    pub fn new(uav: &UavConfig, usv: &UsvConfig) -> Self {
        Self {
            velocity: [Pid::new(uav.velocity), Pid::new(uav.velocity), Pid::new(uav.velocity)],
            uav: uav.clone(),
            usv: usv.clone(),
        }
    }

    pub fn update(&mut self, uav: &UavState, usv: &UsvState, dt: f64) -> Result<LandingStep, LandingError> {
        if usv.v.abs() > self.usv.stationary_speed {
            return Err(LandingError::CarrierMoving { speed: usv.v.abs() });
        }
        let lateral = usv.position() - uav.horizontal();
        let height = uav.position.z - self.usv.deck_height;
        let aligned = lateral.norm() < self.uav.align_tolerance;
        if aligned && height <= self.uav.touchdown_margin {
            return Ok(LandingStep::Landed);
        }

        let kp = self.uav.position.kp;
        let mut setpoint = Vector3::new(kp * lateral.x, kp * lateral.y, 0.0);
        let horizontal = setpoint.xy().norm();
        if horizontal > self.uav.horizontal_speed_max {
            setpoint *= self.uav.horizontal_speed_max / horizontal;
        }
        if aligned {
            // Slow the final metres so touchdown does not overshoot the deck.
            setpoint.z = -self.uav.descent_rate.min((kp * height).max(0.2));
        }
        let command =
            velocity_command(&mut self.velocity, &self.uav, uav, &setpoint, &Vector3::zeros(), Some(usv.psi), dt);
        Ok(LandingStep::Command(command))
    }
}
