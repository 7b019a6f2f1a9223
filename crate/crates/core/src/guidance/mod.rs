//! Horizontal-plane guidance: Bernstein paths/trajectories, the parallel
//! transport frame, and the path-following / trajectory-tracking outer
//! loops.
//!
//! Guidance works in the world (x, y) plane; depth commands come from an
//! optional companion profile fed to the autopilot, so the outer loops
//! stay 2D while the vehicle tracks depth separately.

pub mod bernstein;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bernstein::{BernsteinPoly, Curve1, Curve2};

use crate::{Matrix2, Vector2};

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("parameter {tau} outside curve domain [0, {domain_end}]")]
    Domain { tau: f64, domain_end: f64 },
    #[error("curve tangent degenerate (speed {speed:.3e} below threshold)")]
    DegenerateTangent { speed: f64 },
    #[error("curve is not regular: min parametric speed {min_speed:.3e}")]
    IrregularCurve { min_speed: f64 },
    #[error("command direction degenerate (norm {norm:.3e}); holding previous heading")]
    DegenerateCommand { norm: f64 },
    #[error("path file: {0}")]
    Schema(String),
    #[error("path io: {0}")]
    Io(#[from] std::io::Error),
}

/// Minimum parametric speed treated as a regular tangent [m per unit
/// parameter].
pub const EPS_SPEED: f64 = 1e-6;

/// A 2D path or trajectory with its derivative curves and an optional
/// depth profile over the same domain.
#[derive(Debug, Clone)]
pub struct GuidanceCurve {
    curve: Curve2,
    hodograph: Curve2,
    second: Curve2,
    depth_profile: Option<Curve1>,
}

impl GuidanceCurve {
    pub fn new(curve: Curve2, depth_profile: Option<Curve1>) -> Result<Self, GuidanceError> {
        curve.verify_regular(EPS_SPEED)?;
        if let Some(z) = &depth_profile {
            if (z.domain_end() - curve.domain_end()).abs() > 1e-9 {
                return Err(GuidanceError::Schema(format!(
                    "depth profile domain {} differs from path domain {}",
                    z.domain_end(),
                    curve.domain_end()
                )));
            }
        }
        let hodograph = curve.derivative();
        let second = hodograph.derivative();
        Ok(Self {
            curve,
            hodograph,
            second,
            depth_profile,
        })
    }

    pub fn domain_end(&self) -> f64 {
        self.curve.domain_end()
    }

    pub fn position(&self, tau: f64) -> Result<Vector2, GuidanceError> {
        self.curve.eval(tau)
    }

    pub fn velocity(&self, tau: f64) -> Result<Vector2, GuidanceError> {
        self.hodograph.eval(tau)
    }

    /// Desired speed `||p'(tau)||`.
    pub fn speed(&self, tau: f64) -> Result<f64, GuidanceError> {
        Ok(self.velocity(tau)?.norm())
    }

    pub fn depth(&self, tau: f64) -> Result<Option<f64>, GuidanceError> {
        match &self.depth_profile {
            Some(z) => Ok(Some(z.eval(tau)?[0])),
            None => Ok(None),
        }
    }

    pub fn curve(&self) -> &Curve2 {
        &self.curve
    }
}

/// Orthonormal moving frame carried by the virtual target.
#[derive(Debug, Clone, Copy)]
pub struct TransportFrame {
    /// Unit tangent.
    pub t1: Vector2,
    /// Unit normal, +90 deg from the tangent.
    pub t2: Vector2,
    /// Frame angular rate d(angle of t1)/d tau.
    pub omega: f64,
}

impl TransportFrame {
    /// Rotation from frame coordinates to world: columns [t1, t2].
    pub fn rotation_to_world(&self) -> Matrix2 {
        Matrix2::new(self.t1.x, self.t2.x, self.t1.y, self.t2.y)
    }
}

fn rot90(v: Vector2) -> Vector2 {
    Vector2::new(-v.y, v.x)
}

/// Tangent frame of the curve at `tau`; errors if the parametric speed is
/// below the regularity threshold.
pub fn transport_frame(curve: &GuidanceCurve, tau: f64) -> Result<TransportFrame, GuidanceError> {
    let d1 = curve.velocity(tau)?;
    let speed = d1.norm();
    if speed < EPS_SPEED {
        return Err(GuidanceError::DegenerateTangent { speed });
    }
    let t1 = d1 / speed;
    let d2 = curve.second.eval(tau)?;
    // angle rate of the tangent: (p' x p'') / ||p'||^2
    let omega = (d1.x * d2.y - d1.y * d2.x) / (speed * speed);
    Ok(TransportFrame {
        t1,
        t2: rot90(t1),
        omega,
    })
}

/// Path-following gains: along-frame offset `d` [m] and virtual-time gain
/// `k_gamma` [1/s].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PfGains {
    pub d: f64,
    pub k_gamma: f64,
}

impl Default for PfGains {
    fn default() -> Self {
        Self { d: 50.0, k_gamma: 1.0 }
    }
}

impl PfGains {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.d > 0.0) || !(self.k_gamma > 0.0) {
            return Err(format!(
                "path-following gains must be positive, got d={} k_gamma={}",
                self.d, self.k_gamma
            ));
        }
        Ok(())
    }
}

/// Path-following error expressed in the transport frame:
/// `p_T = R_I^T (p - p_d(gamma))`.
pub fn pf_error(
    p: &Vector2,
    gamma: f64,
    curve: &GuidanceCurve,
) -> Result<(f64, f64), GuidanceError> {
    let frame = transport_frame(curve, gamma)?;
    let rel = p - curve.position(gamma)?;
    Ok((frame.t1.dot(&rel), frame.t2.dot(&rel)))
}

/// Rate of progression of the virtual time:
///
/// `gamma_dot = [v w1 + k_gamma (p - p_d)]^T t1 / ||p_d'||`
///
/// clamped so gamma stays in [0, T].
pub fn pf_gamma_rate(
    p: &Vector2,
    gamma: f64,
    curve: &GuidanceCurve,
    v: f64,
    w1: &Vector2,
    k_gamma: f64,
) -> Result<f64, GuidanceError> {
    let d1 = curve.velocity(gamma)?;
    let speed = d1.norm();
    if speed < EPS_SPEED {
        return Err(GuidanceError::DegenerateTangent { speed });
    }
    let t1 = d1 / speed;
    let rel = p - curve.position(gamma)?;
    let mut rate = (v * w1 + k_gamma * rel).dot(&t1) / speed;
    if (gamma <= 0.0 && rate < 0.0) || (gamma >= curve.domain_end() && rate > 0.0) {
        rate = 0.0;
    }
    Ok(rate)
}

/// Orientation command of the path-following law:
///
/// `R_c = R_T^I [[d, y_T], [-y_T, d]] / sqrt(d^2 + y_T^2)`
///
/// returning the rotation and the yaw command extracted from its first
/// column.
pub fn pf_orientation_cmd(
    gamma: f64,
    curve: &GuidanceCurve,
    y_t: f64,
    d: f64,
) -> Result<(Matrix2, f64), GuidanceError> {
    assert!(d > 0.0, "pf gain d must be positive");
    let frame = transport_frame(curve, gamma)?;
    let den = (d * d + y_t * y_t).sqrt();
    let inner = Matrix2::new(d / den, y_t / den, -y_t / den, d / den);
    let r_c = frame.rotation_to_world() * inner;
    let psi_c = r_c[(1, 0)].atan2(r_c[(0, 0)]);
    Ok((r_c, psi_c))
}

/// Trajectory-tracking position error `e_p = p_d(t) - p` (world frame;
/// sign opposite to the path-following convention).
pub fn tt_error(p: &Vector2, t: f64, curve: &GuidanceCurve) -> Result<Vector2, GuidanceError> {
    Ok(curve.position(t)? - p)
}

/// Speed saturation bounds for the trajectory-tracking speed command.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 15.0,
        }
    }
}

/// Trajectory-tracking commands:
///
/// `v_c = (k_p e_p + v_d t1)^T w1` (saturated)
/// `R_c = [b1, rot90(b1)]` with `b1 = (k_p e_p + v_d t1) / ||.||`
pub fn tt_commands(
    e_p: &Vector2,
    t: f64,
    curve: &GuidanceCurve,
    k_p: f64,
    w1: &Vector2,
    limits: &SpeedLimits,
) -> Result<(f64, Matrix2, f64), GuidanceError> {
    let frame = transport_frame(curve, t)?;
    let v_d = curve.speed(t)?;
    let cmd = k_p * e_p + v_d * frame.t1;
    let norm = cmd.norm();
    if norm < EPS_SPEED {
        return Err(GuidanceError::DegenerateCommand { norm });
    }
    let v_c = cmd.dot(w1).clamp(limits.v_min, limits.v_max);
    let b1 = cmd / norm;
    let b2 = rot90(b1);
    let r_c = Matrix2::new(b1.x, b2.x, b1.y, b2.y);
    let psi_c = b1.y.atan2(b1.x);
    Ok((v_c, r_c, psi_c))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathFile {
    schema_version: u32,
    /// Polynomial order; must equal points.len() - 1.
    order: usize,
    domain_end: f64,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    depth_profile: Option<Vec<f64>>,
}

/// Loads a path/trajectory file (JSON): order, domain end, 2D control
/// points and an optional depth profile over the same domain.
pub fn load_curve_str(text: &str) -> Result<GuidanceCurve, GuidanceError> {
    let file: PathFile = serde_json::from_str(text)
        .map_err(|e| GuidanceError::Schema(format!("line {}: {}", e.line(), e)))?;
    if file.schema_version != 1 {
        return Err(GuidanceError::Schema(format!(
            "unsupported schema version {}",
            file.schema_version
        )));
    }
    if file.order + 1 != file.points.len() {
        return Err(GuidanceError::Schema(format!(
            "order {} inconsistent with {} control points",
            file.order,
            file.points.len()
        )));
    }
    let pts = file
        .points
        .iter()
        .map(|p| Vector2::new(p[0], p[1]))
        .collect();
    let curve = Curve2::new(pts, file.domain_end)?;
    let depth = match file.depth_profile {
        Some(zs) => Some(Curve1::new(
            zs.iter().map(|&z| nalgebra::SVector::<f64, 1>::new(z)).collect(),
            file.domain_end,
        )?),
        None => None,
    };
    GuidanceCurve::new(curve, depth)
}

pub fn load_curve(path: &std::path::Path) -> Result<GuidanceCurve, GuidanceError> {
    let text = std::fs::read_to_string(path)?;
    load_curve_str(&text)
}
