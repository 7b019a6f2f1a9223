//! Hydrostatic restoring loads, regular-wave pressure, and pressure
//! integration over a triangulated hull surface.

pub mod mesh;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rigid_body::{rotation_body_to_horizontal, GeneralizedForce, MassProperties};
use crate::{Vector3, Vector6, GRAVITY, WATER_DENSITY};

pub use mesh::HullMesh;

#[derive(Debug, Error)]
pub enum HydrostaticsError {
    #[error("invalid wave parameters: {0}")]
    InvalidWave(String),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
}

/// Progressive regular deep-water wave description.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct WaveParams {
    /// Amplitude [m].
    pub amplitude: f64,
    /// Wave number [rad/m].
    pub wave_number: f64,
    /// Frequency [rad/s].
    pub omega: f64,
}

impl WaveParams {
    pub fn new(amplitude: f64, wave_number: f64, omega: f64) -> Result<Self, HydrostaticsError> {
        if !(amplitude >= 0.0) {
            return Err(HydrostaticsError::InvalidWave(format!(
                "amplitude must be >= 0, got {amplitude}"
            )));
        }
        if !(wave_number > 0.0) {
            return Err(HydrostaticsError::InvalidWave(format!(
                "wave number must be > 0, got {wave_number}"
            )));
        }
        if !(omega > 0.0) {
            return Err(HydrostaticsError::InvalidWave(format!(
                "frequency must be > 0, got {omega}"
            )));
        }
        Ok(Self {
            amplitude,
            wave_number,
            omega,
        })
    }

    /// Wave with frequency from the deep-water dispersion relation
    /// `omega^2 = g k`.
    pub fn deep_water(amplitude: f64, wave_number: f64) -> Result<Self, HydrostaticsError> {
        Self::new(amplitude, wave_number, (GRAVITY * wave_number).sqrt())
    }

    /// True when the frequency satisfies deep-water dispersion to 1e-9
    /// relative.
    pub fn satisfies_dispersion(&self) -> bool {
        let lhs = self.omega * self.omega;
        let rhs = GRAVITY * self.wave_number;
        (lhs - rhs).abs() <= 1e-9 * rhs
    }

    /// Calm variant used to split buoyancy from wave forcing.
    pub fn calm(&self) -> Self {
        Self {
            amplitude: 0.0,
            ..*self
        }
    }
}

/// Total pressure of the regular deep-water wave field at a world point
/// (z positive up, zero at the calm surface) [Pa]:
///
/// `p = -rho g z + rho g A e^{k z} sin(k x - omega t)`
pub fn wave_pressure(point: &Vector3, t: f64, wp: &WaveParams) -> f64 {
    let rho_g = WATER_DENSITY * GRAVITY;
    -rho_g * point.z
        + rho_g
            * wp.amplitude
            * (wp.wave_number * point.z).exp()
            * (wp.wave_number * point.x - wp.omega * t).sin()
}

/// Free-surface elevation of the wave at horizontal position x [m].
pub fn wave_elevation(x: f64, t: f64, wp: &WaveParams) -> f64 {
    wp.amplitude * (wp.wave_number * x - wp.omega * t).sin()
}

/// World pose of the hull used when sampling the pressure field.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    /// World position (z up).
    pub position: Vector3,
    /// Euler angles (phi, theta, psi).
    pub attitude: Vector3,
}

/// Buoyancy force magnitude and body-frame center of buoyancy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BuoyancyProperties {
    /// Buoyancy force magnitude [N].
    pub force: f64,
    /// Center of buoyancy, body frame [m].
    pub cb: Vector3,
}

impl BuoyancyProperties {
    pub fn new(force: f64, cb: Vector3) -> Result<Self, HydrostaticsError> {
        if !(force >= 0.0) || !force.is_finite() {
            return Err(HydrostaticsError::InvalidWave(format!(
                "buoyancy force must be >= 0, got {force}"
            )));
        }
        Ok(Self { force, cb })
    }

    /// Buoyancy of a closed mesh in calm water: `rho g V` applied at the
    /// volume centroid.
    pub fn from_mesh(mesh: &HullMesh) -> Self {
        Self {
            force: WATER_DENSITY * GRAVITY * mesh.volume(),
            cb: mesh.volume_centroid(),
        }
    }
}

/// Integrates a scalar pressure field over the hull with the midpoint
/// (edge Gauss point) rule, returning body-frame force and moment:
///
/// `F = -(1/3) sum (p12 + p23 + p31) A_i`
/// `M = -(1/3) sum (r12 p12 + r23 p23 + r31 p31) x A_i`
///
/// The field is sampled at the Gauss points transformed to world
/// coordinates; the sums stay in the body frame.
pub fn integrate_pressure<F>(mesh: &HullMesh, pose: &Pose, mut field: F) -> GeneralizedForce
where
    F: FnMut(&Vector3) -> f64,
{
    let rot = rotation_body_to_horizontal(&pose.attitude);
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for tri in mesh.triangles() {
        let mut weighted = Vector3::zeros();
        let mut p_sum = 0.0;
        for gp in &tri.gauss_points {
            let h = rot * gp;
            let world = Vector3::new(
                pose.position.x + h.x,
                pose.position.y + h.y,
                pose.position.z - h.z,
            );
            let p = field(&world);
            p_sum += p;
            weighted += gp * p;
        }
        force -= p_sum * tri.area_vector;
        moment -= weighted.cross(&tri.area_vector);
    }
    let mut out = Vector6::zeros();
    for i in 0..3 {
        out[i] = force[i] / 3.0;
        out[3 + i] = moment[i] / 3.0;
    }
    GeneralizedForce(out)
}

/// Wave plus hydrostatic pressure loads on the hull at the given pose and
/// time. Gauss points above the local wave elevation contribute zero
/// pressure; each clamp is counted and reported through the log.
pub fn integrate_wave_loads(
    mesh: &HullMesh,
    pose: &Pose,
    t: f64,
    wp: &WaveParams,
) -> GeneralizedForce {
    let mut clamped = 0usize;
    let force = integrate_pressure(mesh, pose, |world| {
        if world.z > wave_elevation(world.x, t, wp) {
            clamped += 1;
            0.0
        } else {
            wave_pressure(world, t, wp)
        }
    });
    if clamped > 0 {
        log::debug!("{clamped} Gauss points above the wave surface clamped to zero pressure");
    }
    force
}

/// Hydrostatic restoring loads from weight and buoyancy (body frame,
/// z down):
///
/// ```text
/// [ -(W-B) sin(th)
///    (W-B) cos(th) sin(phi)
///    (W-B) cos(th) cos(phi)
///    (yG W - yB B) cos(th) cos(phi) - (zG W - zB B) cos(th) sin(phi)
///    (zG W - zB B) sin(th)          - (xG W - xB B) cos(th) cos(phi)
///    (yG W - yB B) sin(th)          - (xG W - xB B) cos(th) sin(phi) ]
/// ```
pub fn hydrostatic_restoring(
    mp: &MassProperties,
    bp: &BuoyancyProperties,
    attitude: &Vector3,
) -> GeneralizedForce {
    let w = mp.weight();
    let b = bp.force;
    let (xg, yg, zg) = (mp.cg().x, mp.cg().y, mp.cg().z);
    let (xb, yb, zb) = (bp.cb.x, bp.cb.y, bp.cb.z);
    let (sphi, cphi) = attitude.x.sin_cos();
    let (sth, cth) = attitude.y.sin_cos();
    GeneralizedForce(Vector6::from_column_slice(&[
        -(w - b) * sth,
        (w - b) * cth * sphi,
        (w - b) * cth * cphi,
        (yg * w - yb * b) * cth * cphi - (zg * w - zb * b) * cth * sphi,
        (zg * w - zb * b) * sth - (xg * w - xb * b) * cth * cphi,
        (yg * w - yb * b) * sth - (xg * w - xb * b) * cth * sphi,
    ]))
}
