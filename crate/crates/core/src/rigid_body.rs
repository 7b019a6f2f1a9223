//! Rigid-body equations of motion and fixed-step integration.
//!
//! The dynamics are solved in the body frame (x forward, y starboard,
//! z down). `coupling_split` separates the non-inertial coupling vector
//! into a velocity-only part and an acceleration-proportional part so the
//! acceleration solve stays explicit:
//!
//! ```text
//! (M + B_acc - A_added) * s_dot = F_external - b_vel(s)
//! ```

use nalgebra::SVector;
use thiserror::Error;

use crate::{Matrix3, Matrix6, Vector3, Vector6};

#[derive(Debug, Error)]
pub enum RigidBodyError {
    #[error("effective mass matrix is ill-conditioned (cond = {cond:.3e}); coefficient set is inconsistent")]
    SingularMassMatrix { cond: f64 },
    #[error("pitch angle {theta:.4} rad too close to +/-pi/2; simulation aborted")]
    GimbalLock { theta: f64 },
    #[error("state contains a non-finite component; model blow-up")]
    NonFiniteState,
    #[error("invalid mass properties: {0}")]
    InvalidMassProperties(String),
}

/// Mass, center of gravity and inertia description of the vehicle.
///
/// Gyration radii define the diagonal inertia terms as `I_ii = m * r_i^2`
/// exactly; products of inertia default to zero but are carried so trim or
/// ballast redistribution can be modeled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    mass: f64,
    cg: Vector3,
    gyration: Vector3,
    /// (I_xy, I_xz, I_yz) [kg m^2]
    products: Vector3,
}

impl MassProperties {
    pub fn new(
        mass: f64,
        cg: Vector3,
        gyration: Vector3,
        products: Vector3,
    ) -> Result<Self, RigidBodyError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(RigidBodyError::InvalidMassProperties(format!(
                "mass must be positive, got {mass}"
            )));
        }
        if gyration.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(RigidBodyError::InvalidMassProperties(format!(
                "gyration radii must be positive, got {:?}",
                gyration
            )));
        }
        if cg.iter().chain(products.iter()).any(|v| !v.is_finite()) {
            return Err(RigidBodyError::InvalidMassProperties(
                "cg offsets and inertia products must be finite".into(),
            ));
        }
        Ok(Self {
            mass,
            cg,
            gyration,
            products,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cg(&self) -> Vector3 {
        self.cg
    }

    /// Weight force magnitude W = m g [N].
    pub fn weight(&self) -> f64 {
        self.mass * crate::GRAVITY
    }

    /// Full inertia tensor about the body origin.
    pub fn inertia(&self) -> Matrix3 {
        let m = self.mass;
        let (ixx, iyy, izz) = (
            m * self.gyration.x * self.gyration.x,
            m * self.gyration.y * self.gyration.y,
            m * self.gyration.z * self.gyration.z,
        );
        let (ixy, ixz, iyz) = (self.products.x, self.products.y, self.products.z);
        Matrix3::new(ixx, -ixy, -ixz, -ixy, iyy, -iyz, -ixz, -iyz, izz)
    }
}

/// Pose plus body-frame velocity of the vehicle.
///
/// `position` is world (x, y, z) with z positive up; `attitude` is
/// (phi, theta, psi) in radians; `velocity` is [u,v,w,p,q,r] in the body
/// frame (z down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vector3,
    pub attitude: Vector3,
    pub velocity: Vector6,
}

impl VehicleState {
    pub fn new(position: Vector3, attitude: Vector3, velocity: Vector6) -> Self {
        Self {
            position,
            attitude,
            velocity,
        }
    }

    /// Depth below the calm surface [m], positive when submerged.
    pub fn depth(&self) -> f64 {
        -self.position.z
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.attitude.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
    }

    /// Wraps roll and yaw to (-pi, pi]. Pitch is guarded by the gimbal
    /// check and never wrapped.
    pub fn wrap_attitude(&mut self) {
        self.attitude.x = crate::autopilot::wrap_angle(self.attitude.x);
        self.attitude.z = crate::autopilot::wrap_angle(self.attitude.z);
    }
}

/// Body-frame forces and moments [X, Y, Z, K, M, N].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedForce(pub Vector6);

impl GeneralizedForce {
    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Add for GeneralizedForce {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for GeneralizedForce {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for GeneralizedForce {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

/// Assembles the 6x6 rigid-body mass matrix from mass, CG offsets and the
/// inertia tensor. Symmetric by construction.
pub fn assemble_mass_matrix(mp: &MassProperties) -> Matrix6 {
    let m = mp.mass;
    let (xg, yg, zg) = (mp.cg.x, mp.cg.y, mp.cg.z);
    let inertia = mp.inertia();
    let mut mat = Matrix6::zeros();
    mat[(0, 0)] = m;
    mat[(1, 1)] = m;
    mat[(2, 2)] = m;
    mat[(0, 4)] = m * zg;
    mat[(0, 5)] = -m * yg;
    mat[(1, 3)] = -m * zg;
    mat[(1, 5)] = m * xg;
    mat[(2, 3)] = m * yg;
    mat[(2, 4)] = -m * xg;
    for i in 0..3 {
        for j in 0..3 {
            mat[(3 + i, 3 + j)] = inertia[(i, j)];
        }
    }
    // mirror the translational/rotational coupling block
    for i in 0..3 {
        for j in 3..6 {
            mat[(j, i)] = mat[(i, j)];
        }
    }
    mat
}

/// Splits the non-inertial coupling vector into a velocity-only part and
/// the matrix multiplying accelerations, so that the printed coupling
/// vector equals `b_vel(s) + B_acc * s_dot` for any acceleration.
///
/// Every acceleration term is proportional to a CG offset, so `B_acc`
/// vanishes for a vehicle with the CG at the body origin.
pub fn coupling_split(mp: &MassProperties, s: &Vector6) -> (Vector6, Matrix6) {
    let m = mp.mass;
    let (xg, yg, zg) = (mp.cg.x, mp.cg.y, mp.cg.z);
    let inertia = mp.inertia();
    let (ixx, iyy, izz) = (inertia[(0, 0)], inertia[(1, 1)], inertia[(2, 2)]);
    let (u, v, w, p, q, r) = (s[0], s[1], s[2], s[3], s[4], s[5]);

    let b_vel = Vector6::from_column_slice(&[
        m * (w * q - v * r - xg * (q * q + r * r) + yg * p * q + zg * p * r),
        m * (u * r - w * p - yg * (r * r + p * p) + zg * q * r + xg * q * p),
        m * (v * p - u * q - zg * (p * p + q * q) + xg * r * p + yg * r * q),
        (izz - iyy) * q * r + m * (yg * (-u * q + v * p) - zg * (-w * p + u * r)),
        (ixx - izz) * r * p + m * (zg * (-v * r + w * q) - xg * (-u * q + v * p)),
        (iyy - ixx) * p * q + m * (xg * (-w * p + u * r) - yg * (-v * r + w * q)),
    ]);

    let mut b_acc = Matrix6::zeros();
    b_acc[(0, 4)] = m * zg;
    b_acc[(0, 5)] = -m * yg;
    b_acc[(1, 3)] = -m * zg;
    b_acc[(1, 5)] = m * xg;
    b_acc[(2, 3)] = m * yg;
    b_acc[(2, 4)] = -m * xg;
    b_acc[(3, 1)] = -m * zg;
    b_acc[(3, 2)] = m * yg;
    b_acc[(4, 0)] = m * zg;
    b_acc[(4, 2)] = -m * xg;
    b_acc[(5, 0)] = -m * yg;
    b_acc[(5, 1)] = m * xg;

    (b_vel, b_acc)
}

const MAX_CONDITION: f64 = 1e12;

/// Solves `M_eff * s_dot = rhs` by dense LU with a condition-number guard.
pub fn solve_accelerations(m_eff: &Matrix6, rhs: &Vector6) -> Result<Vector6, RigidBodyError> {
    let svd = m_eff.svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(RigidBodyError::SingularMassMatrix { cond });
    }
    let lu = m_eff.lu();
    lu.solve(rhs)
        .ok_or(RigidBodyError::SingularMassMatrix { cond })
}

/// Rotation from the body frame to the horizontal frame whose x, y axes
/// coincide with world x, y and whose z axis points down.
pub fn rotation_body_to_horizontal(attitude: &Vector3) -> Matrix3 {
    let (sphi, cphi) = attitude.x.sin_cos();
    let (sth, cth) = attitude.y.sin_cos();
    let (spsi, cpsi) = attitude.z.sin_cos();
    Matrix3::new(
        cpsi * cth,
        cpsi * sth * sphi - spsi * cphi,
        cpsi * sth * cphi + spsi * sphi,
        spsi * cth,
        spsi * sth * sphi + cpsi * cphi,
        spsi * sth * cphi - cpsi * sphi,
        -sth,
        cth * sphi,
        cth * cphi,
    )
}

/// Maps a body-frame point to world coordinates (z positive up).
pub fn body_point_to_world(position: &Vector3, attitude: &Vector3, point: &Vector3) -> Vector3 {
    let r = rotation_body_to_horizontal(attitude) * point;
    Vector3::new(position.x + r.x, position.y + r.y, position.z - r.z)
}

const GIMBAL_GUARD: f64 = 1e-3;

/// Pose rates from the body-frame velocity: world position rate (z up)
/// and ZYX Euler-angle rates.
pub fn kinematics(state: &VehicleState) -> Result<(Vector3, Vector3), RigidBodyError> {
    let theta = state.attitude.y;
    if theta.abs() >= std::f64::consts::FRAC_PI_2 - GIMBAL_GUARD {
        return Err(RigidBodyError::GimbalLock { theta });
    }
    let rot = rotation_body_to_horizontal(&state.attitude);
    let v_lin = Vector3::new(state.velocity[0], state.velocity[1], state.velocity[2]);
    let rate_h = rot * v_lin;
    let position_rate = Vector3::new(rate_h.x, rate_h.y, -rate_h.z);

    let (p, q, r) = (state.velocity[3], state.velocity[4], state.velocity[5]);
    let (sphi, cphi) = state.attitude.x.sin_cos();
    let (sth, cth) = state.attitude.y.sin_cos();
    let tth = sth / cth;
    let euler_rate = Vector3::new(
        p + (q * sphi + r * cphi) * tth,
        q * cphi - r * sphi,
        (q * sphi + r * cphi) / cth,
    );
    Ok((position_rate, euler_rate))
}

/// One classical RK4 step of a generic first-order ODE.
pub fn rk4_step_vec<const N: usize, F, E>(
    t: f64,
    y: &SVector<f64, N>,
    dt: f64,
    mut f: F,
) -> Result<SVector<f64, N>, E>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &(y + 0.5 * dt * k1))?;
    let k3 = f(t + 0.5 * dt, &(y + 0.5 * dt * k2))?;
    let k4 = f(t + dt, &(y + dt * k3))?;
    Ok(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

fn pack(state: &VehicleState) -> SVector<f64, 12> {
    let mut y = SVector::<f64, 12>::zeros();
    for i in 0..3 {
        y[i] = state.position[i];
        y[3 + i] = state.attitude[i];
    }
    for i in 0..6 {
        y[6 + i] = state.velocity[i];
    }
    y
}

fn unpack(y: &SVector<f64, 12>) -> VehicleState {
    VehicleState {
        position: Vector3::new(y[0], y[1], y[2]),
        attitude: Vector3::new(y[3], y[4], y[5]),
        velocity: Vector6::from_fn(|i, _| y[6 + i]),
    }
}

/// Advances the 12-state pose + velocity system one RK4 step.
///
/// `accel_fn` must be a pure function of (t, state) returning the body
/// acceleration `s_dot` (the caller performs the effective-mass solve).
pub fn rk4_step<F>(
    state: &VehicleState,
    t: f64,
    dt: f64,
    mut accel_fn: F,
) -> Result<VehicleState, RigidBodyError>
where
    F: FnMut(f64, &VehicleState) -> Result<Vector6, RigidBodyError>,
{
    assert!(dt > 0.0, "rk4_step requires dt > 0");
    let y0 = pack(state);
    let y1 = rk4_step_vec(t, &y0, dt, |tt, y| {
        let st = unpack(y);
        let (pos_rate, euler_rate) = kinematics(&st)?;
        let acc = accel_fn(tt, &st)?;
        let mut dy = SVector::<f64, 12>::zeros();
        for i in 0..3 {
            dy[i] = pos_rate[i];
            dy[3 + i] = euler_rate[i];
        }
        for i in 0..6 {
            dy[6 + i] = acc[i];
        }
        Ok(dy)
    })?;
    let next = unpack(&y1);
    if !next.is_finite() {
        return Err(RigidBodyError::NonFiniteState);
    }
    Ok(next)
}
