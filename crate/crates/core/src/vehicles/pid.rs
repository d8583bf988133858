use crate::geometry::wrap_angle;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    /// Bound on the magnitude of the integral term's accumulator.
    #[serde(default = "default_clamp")]
    pub integral_clamp: f64,
}

fn default_clamp() -> f64 {
    1.0
}

impl PidGains {
    pub const fn new(kp: f64, ki: f64, kd: f64, integral_clamp: f64) -> Self {
        Self { kp, ki, kd, integral_clamp }
    }

    pub fn is_valid(&self) -> bool {
        self.kp >= 0.0 && self.ki >= 0.0 && self.kd >= 0.0 && self.integral_clamp > 0.0
    }
}

/// Discrete PID loop. With `angular` set, error differences are wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    gains: PidGains,
    angular: bool,
    integral: f64,
    previous: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, angular: false, integral: 0.0, previous: None }
    }

    pub fn angular(gains: PidGains) -> Self {
        Self { angular: true, ..Self::new(gains) }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.previous = None;
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let g = &self.gains;
        self.integral = (self.integral + error * dt).clamp(-g.integral_clamp, g.integral_clamp);
        let derivative = match self.previous {
            Some(prev) if dt > 0.0 => {
                let delta = error - prev;
                (if self.angular { wrap_angle(delta) } else { delta }) / dt
            }
            _ => 0.0,
        };
        self.previous = Some(error);
        g.kp * error + g.ki * self.integral + g.kd * derivative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_gives_zero_output() {
        let mut pid = Pid::new(PidGains::new(1.0, 0.5, 0.2, 1.0));
        assert_eq!(pid.update(0.0, 0.05), 0.0);
        assert_eq!(pid.update(0.0, 0.05), 0.0);
    }

    #[test]
    fn integral_is_clamped() {
        let mut pid = Pid::new(PidGains::new(0.0, 1.0, 0.0, 0.3));
        for _ in 0..100 {
            pid.update(1.0, 0.1);
        }
        assert!((pid.update(1.0, 0.1) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn angular_derivative_ignores_wrap() {
        let mut pid = Pid::angular(PidGains::new(0.0, 0.0, 1.0, 1.0));
        pid.update(3.1, 0.1);
        let d = pid.update(-3.1, 0.1);
        assert!(d.abs() < 1.0, "derivative across ±π should be small, got {d}");
    }
}
