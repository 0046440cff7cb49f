//! The driving agent: sensing, a rule-based pure-pursuit controller and a
//! small file-loaded MLP controller.

mod nn;
mod rule;
mod sensor;

use serde::{Deserialize, Serialize};

pub use nn::{load_weights, nn_forward, nn_input, nn_raw, parse_weights, Activation, Layer, Weights};
pub use rule::rule_controller;
pub use sensor::{ray_angles, sense};

use crate::world::{Mission, Pose};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("weights parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("network must have ≥1 layer")]
    Empty,
    #[error("layer {layer}: {message}")]
    Dimension { layer: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub ranges: Vec<f64>,
    pub gps: Pose,
    pub speed: f64,
    pub weather: f64,
    pub frame: u64,
}

fn finite_or_zero(v: &mut f64) -> u32 {
    if v.is_finite() {
        0
    } else {
        *v = 0.0;
        1
    }
}

impl SensorFrame {
    /// Sensor-boundary policy for corrupted values: NaN ranges read as 0 (an
    /// obstacle at the bumper), other ranges are clamped to `[0, max_range]`;
    /// non-finite gps, speed or weather become 0, weather is clamped to
    /// `[0, 1]` and the heading is normalized. Returns the substitution count.
    /// A frame with valid values is returned bit-identical.
    pub fn sanitize(&mut self, max_range: f64) -> u32 {
        let mut n = 0;
        for r in &mut self.ranges {
            if r.is_nan() {
                *r = 0.0;
                n += 1;
            } else if !(0.0..=max_range).contains(r) {
                *r = r.clamp(0.0, max_range);
            }
        }
        n += finite_or_zero(&mut self.gps.x) + finite_or_zero(&mut self.gps.y) + finite_or_zero(&mut self.gps.heading);
        self.gps.heading = crate::world::normalize_angle(self.gps.heading);
        n += finite_or_zero(&mut self.speed) + finite_or_zero(&mut self.weather);
        if !(0.0..=1.0).contains(&self.weather) {
            self.weather = self.weather.clamp(0.0, 1.0);
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
    pub frame: u64,
}

/// Command field selector, used by fault targets and the NaN policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandField {
    Steer,
    Throttle,
    Brake,
}

impl CommandField {
    pub const ALL: [CommandField; 3] = [CommandField::Steer, CommandField::Throttle, CommandField::Brake];

    /// Value substituted when the field is NaN.
    pub fn default_value(self) -> f64 {
        match self {
            CommandField::Steer | CommandField::Throttle => 0.0,
            CommandField::Brake => 1.0,
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            CommandField::Steer => (-1.0, 1.0),
            CommandField::Throttle | CommandField::Brake => (0.0, 1.0),
        }
    }

    /// Field policy for a possibly corrupted value: NaN becomes the default,
    /// anything else (including ±∞) is clamped. Returns the value and whether
    /// a NaN substitution happened.
    pub fn sanitize(self, v: f64) -> (f64, bool) {
        if v.is_nan() {
            (self.default_value(), true)
        } else {
            let (lo, hi) = self.range();
            (v.clamp(lo, hi), false)
        }
    }
}

impl ControlCommand {
    /// No steering, no throttle, full brake.
    pub fn safe_default(frame: u64) -> Self {
        ControlCommand { steer: 0.0, throttle: 0.0, brake: 1.0, frame }
    }

    pub fn get(&self, f: CommandField) -> f64 {
        match f {
            CommandField::Steer => self.steer,
            CommandField::Throttle => self.throttle,
            CommandField::Brake => self.brake,
        }
    }

    pub fn set(&mut self, f: CommandField, v: f64) {
        match f {
            CommandField::Steer => self.steer = v,
            CommandField::Throttle => self.throttle = v,
            CommandField::Brake => self.brake = v,
        }
    }

    /// Applies the field policy in place; returns the number of NaN substitutions.
    pub fn sanitize(&mut self) -> u32 {
        let mut n = 0;
        for f in CommandField::ALL {
            let (v, sub) = f.sanitize(self.get(f));
            self.set(f, v);
            n += sub as u32;
        }
        n
    }

    pub fn is_clamped(&self) -> bool {
        CommandField::ALL.iter().all(|&f| {
            let (lo, hi) = f.range();
            (lo..=hi).contains(&self.get(f))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentParams {
    pub num_rays: usize,
    pub max_range: f64,
    pub sigma_gps: f64,
    pub v_target: f64,
    pub v_max: f64,
    pub d_brake: f64,
    /// Half-angle of the cone whose minimum range triggers braking, radians.
    pub brake_cone: f64,
    pub lookahead: f64,
    pub speed_gain: f64,
    pub wheelbase: f64,
    pub max_steer: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            num_rays: 32,
            max_range: 50.0,
            sigma_gps: 0.2,
            v_target: 8.0,
            v_max: 20.0,
            d_brake: 8.0,
            brake_cone: 15f64.to_radians(),
            lookahead: 10.0,
            speed_gain: 0.5,
            wheelbase: 2.7,
            max_steer: 35f64.to_radians(),
        }
    }
}

/// Episode-local controller memory: the controller's own notion of which
/// waypoint comes next, tracked from (possibly faulty) GPS.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControllerState {
    pub next_waypoint: usize,
}

impl ControllerState {
    pub(crate) fn advance(&mut self, gps: &Pose, mission: &Mission) {
        while self.next_waypoint < mission.waypoints.len()
            && gps.dist(&mission.waypoints[self.next_waypoint]) <= mission.goal_radius
        {
            self.next_waypoint += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_substitutes_nan_and_clamps_infinity() {
        let mut c = ControlCommand { steer: f64::NAN, throttle: f64::INFINITY, brake: f64::NAN, frame: 3 };
        assert_eq!(c.sanitize(), 2);
        assert_eq!((c.steer, c.throttle, c.brake), (0.0, 1.0, 1.0));
        let mut c = ControlCommand { steer: f64::NEG_INFINITY, throttle: -0.5, brake: 0.25, frame: 0 };
        assert_eq!(c.sanitize(), 0);
        assert_eq!((c.steer, c.throttle, c.brake), (-1.0, 0.0, 0.25));
        assert!(c.is_clamped());
    }
}
