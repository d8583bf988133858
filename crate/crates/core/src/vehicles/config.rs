use super::PidGains;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Bundled limits and gains; `VehicleConfig::default()` mirrors this file.
pub const DEFAULT_CONFIG: &str = include_str!("../../assets/vehicles.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read vehicle config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed vehicle config: {0}")]
    Malformed(#[from] toml::de::Error),
    #[error("invalid vehicle config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsvConfig {
    pub v_max: f64,
    pub a_max: f64,
    pub r_max: f64,
    pub cruise_speed: f64,
    pub capture_radius: f64,
    /// Below this surge speed the USV counts as stationary.
    pub stationary_speed: f64,
    /// Height of the landing deck above the waterline.
    pub deck_height: f64,
    /// Speed setpoint per meter of remaining path.
    pub approach_gain: f64,
    pub surge: PidGains,
    pub heading: PidGains,
}

impl Default for UsvConfig {
    fn default() -> Self {
        Self {
            v_max: 3.0,
            a_max: 1.0,
            r_max: 0.6,
            cruise_speed: 2.5,
            capture_radius: 1.5,
            stationary_speed: 0.05,
            deck_height: 0.5,
            approach_gain: 0.5,
            surge: PidGains::new(1.2, 0.05, 0.0, 1.0),
            heading: PidGains::new(2.0, 0.0, 0.2, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    pub u_max: f64,
    pub yaw_rate_max: f64,
    pub horizontal_speed_max: f64,
    pub vertical_speed_max: f64,
    pub capture_radius: f64,
    /// Speed below which a captured waypoint counts as reached.
    pub settle_speed: f64,
    pub takeoff_altitude: f64,
    /// Tangential speed along an orbit, m/s.
    pub orbit_speed: f64,
    pub descent_rate: f64,
    pub align_tolerance: f64,
    pub touchdown_margin: f64,
    pub position: PidGains,
    pub velocity: PidGains,
    pub yaw: PidGains,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            u_max: 2.0,
            yaw_rate_max: 1.0,
            horizontal_speed_max: 4.0,
            vertical_speed_max: 2.0,
            capture_radius: 0.5,
            settle_speed: 0.3,
            takeoff_altitude: 15.0,
            orbit_speed: 2.0,
            descent_rate: 0.5,
            align_tolerance: 0.3,
            touchdown_margin: 0.1,
            position: PidGains::new(0.8, 0.0, 0.0, 1.0),
            velocity: PidGains::new(2.0, 0.2, 0.0, 1.0),
            yaw: PidGains::new(1.5, 0.0, 0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub usv: UsvConfig,
    pub uav: UavConfig,
}

impl VehicleConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: VehicleConfig = toml::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let gains = [
            ("usv.surge", &self.usv.surge),
            ("usv.heading", &self.usv.heading),
            ("uav.position", &self.uav.position),
            ("uav.velocity", &self.uav.velocity),
            ("uav.yaw", &self.uav.yaw),
        ];
        for (name, g) in gains {
            if !g.is_valid() {
                return Err(ConfigError::Invalid(format!("{name}: gains must be non-negative with a positive clamp")));
            }
        }
        let limits = [
            ("usv.v_max", self.usv.v_max),
            ("usv.a_max", self.usv.a_max),
            ("usv.r_max", self.usv.r_max),
            ("usv.capture_radius", self.usv.capture_radius),
            ("uav.u_max", self.uav.u_max),
            ("uav.yaw_rate_max", self.uav.yaw_rate_max),
            ("uav.capture_radius", self.uav.capture_radius),
            ("uav.descent_rate", self.uav.descent_rate),
        ];
        for (name, value) in limits {
            if !(value > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_matches_defaults() {
        assert_eq!(VehicleConfig::from_toml(DEFAULT_CONFIG).unwrap(), VehicleConfig::default());
    }

    #[test]
    fn negative_gain_rejected() {
        let text = DEFAULT_CONFIG.replace("kp = 1.2", "kp = -1.2");
        assert!(matches!(VehicleConfig::from_toml(&text), Err(ConfigError::Invalid(_))));
    }
}
