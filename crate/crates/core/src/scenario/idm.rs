//! Intelligent Driver Model (Treiber's formulation).

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    /// Desired free-road speed v0 [m/s].
    pub desired_speed: f64,
    /// Safe time headway T [s].
    pub time_headway: f64,
    /// Maximum acceleration a [m/s²].
    pub max_accel: f64,
    /// Comfortable deceleration b [m/s²].
    pub comfort_decel: f64,
    /// Jam distance s0 [m].
    pub jam_distance: f64,
    /// Free-road exponent δ.
    pub exponent: f64,
    /// Lower clamp on any command [m/s²], applied as `-emergency_decel`.
    pub emergency_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            desired_speed: 15.0,
            time_headway: 1.5,
            max_accel: 2.0,
            comfort_decel: 2.0,
            jam_distance: 2.0,
            exponent: 4.0,
            emergency_decel: 8.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("idm.desired_speed", self.desired_speed),
            ("idm.time_headway", self.time_headway),
            ("idm.max_accel", self.max_accel),
            ("idm.comfort_decel", self.comfort_decel),
            ("idm.jam_distance", self.jam_distance),
            ("idm.exponent", self.exponent),
            ("idm.emergency_decel", self.emergency_decel),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(
                    name,
                    format!("must be > 0, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// Desired dynamic gap s*(v, Δv). The dynamic part is floored at zero so
    /// that a much faster leader cannot make s* shrink below the jam distance.
    pub fn desired_gap(&self, v: f64, v_lead: f64) -> f64 {
        let dynamic = v * self.time_headway
            + v * (v - v_lead) / (2.0 * (self.max_accel * self.comfort_decel).sqrt());
        self.jam_distance + dynamic.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmCommand {
    pub accel: f64,
    /// Set when the gap was non-positive and the command saturated at the
    /// emergency clamp.
    pub collision_imminent: bool,
}

/// IDM acceleration for a follower at speed `v` behind a leader at `v_lead`
/// with bumper-to-bumper `gap` (`f64::INFINITY` on a free road). The result
/// is clamped to `[-emergency_decel, max_accel]`.
pub fn idm_acceleration(v: f64, v_lead: f64, gap: f64, p: &IdmParams) -> IdmCommand {
    if gap <= 0.0 || gap.is_nan() {
        return IdmCommand {
            accel: -p.emergency_decel,
            collision_imminent: true,
        };
    }
    let v = v.max(0.0);
    let free = (v / p.desired_speed).powf(p.exponent);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let ratio = p.desired_gap(v, v_lead) / gap;
        ratio * ratio
    };
    let raw = p.max_accel * (1.0 - free - interaction);
    IdmCommand {
        accel: raw.clamp(-p.emergency_decel, p.max_accel),
        collision_imminent: false,
    }
}
