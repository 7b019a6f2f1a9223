//! PD depth/heading autopilot with X-plane + sail control allocation.
//!
//! The vertical command `delta_v` and horizontal command `delta_h` are
//! mixed onto the four stern planes and the sail plane:
//!
//! ```text
//! d1 = -dv + dh   (lower starboard)
//! d2 = -dv - dh   (upper starboard)
//! d3 =  dv - dh   (upper port)
//! d4 =  dv + dh   (lower port)
//! d5 =  dv        (sail)
//! ```

use serde::{Deserialize, Serialize};

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if x == 0.0 {
        x = two_pi;
    }
    x - std::f64::consts::PI
}

/// Proportional and derivative gains for the depth and heading loops, in
/// radians of plane command per meter / radian of error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AutopilotGains {
    pub k_pz: f64,
    pub k_dz: f64,
    pub k_ppsi: f64,
    pub k_dpsi: f64,
}

impl AutopilotGains {
    pub fn validate(&self) -> Result<(), String> {
        for (name, g) in [
            ("k_pz", self.k_pz),
            ("k_dz", self.k_dz),
            ("k_ppsi", self.k_ppsi),
            ("k_dpsi", self.k_dpsi),
        ] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(format!("autopilot gain {name} must be >= 0, got {g}"));
            }
        }
        Ok(())
    }
}

/// Magnitude and rate limits applied to every control plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ActuatorLimits {
    /// Max deflection [rad].
    pub delta_max: f64,
    /// Max deflection rate [rad/s].
    pub rate_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            delta_max: 30f64.to_radians(),
            rate_max: 10f64.to_radians(),
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_max > 0.0) || !(self.rate_max > 0.0) {
            return Err(format!(
                "actuator limits must be positive, got delta_max={} rate_max={}",
                self.delta_max, self.rate_max
            ));
        }
        Ok(())
    }
}

/// Measured quantities the PD loops act on. Rates come from the kinematics
/// map, not from differenced measurements.
#[derive(Debug, Clone, Copy)]
pub struct PdFeedback {
    pub z: f64,
    pub z_rate: f64,
    pub psi: f64,
    pub psi_rate: f64,
}

/// PD depth/heading laws producing the raw vertical and horizontal
/// commands. The heading error is wrapped to (-pi, pi] before the gain.
pub fn pd_commands(
    z_ref: f64,
    z_rate_ref: f64,
    psi_ref: f64,
    psi_rate_ref: f64,
    fb: &PdFeedback,
    gains: &AutopilotGains,
) -> (f64, f64) {
    let delta_v = gains.k_pz * (z_ref - fb.z) + gains.k_dz * (z_rate_ref - fb.z_rate);
    let delta_h = gains.k_ppsi * wrap_angle(psi_ref - fb.psi)
        + gains.k_dpsi * (psi_rate_ref - fb.psi_rate);
    (delta_v, delta_h)
}

/// X-plane + sail allocation of the two commands onto five surfaces.
pub fn allocate(delta_v: f64, delta_h: f64) -> [f64; 5] {
    [
        -delta_v + delta_h,
        -delta_v - delta_h,
        delta_v - delta_h,
        delta_v + delta_h,
        delta_v,
    ]
}

/// Clamps each commanded plane to the magnitude and per-step rate limits.
pub fn apply_limits(cmd: &[f64; 5], prev: &[f64; 5], dt: f64, limits: &ActuatorLimits) -> [f64; 5] {
    assert!(dt > 0.0);
    let max_step = limits.rate_max * dt;
    let mut out = [0.0; 5];
    for i in 0..5 {
        let clamped = cmd[i].clamp(-limits.delta_max, limits.delta_max);
        let stepped = clamped.clamp(prev[i] - max_step, prev[i] + max_step);
        if (stepped - cmd[i]).abs() > 1e-12 {
            log::debug!(
                "plane {} command {:.4} rad limited to {:.4} rad",
                i + 1,
                cmd[i],
                stepped
            );
        }
        out[i] = stepped;
    }
    out
}
