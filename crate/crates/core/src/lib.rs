// Validation code uses `!(x > 0.0)` deliberately: unlike `x <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Reduced-order 6DoF simulator for a generic submarine with a layered
//! guidance and control stack.
//!
//! The crate is organized around a closed simulation loop:
//!
//! - [`rigid_body`]: equations of motion, Euler-angle kinematics and the
//!   fixed-step RK4 integrator.
//! - [`hydrostatics`]: restoring loads, regular-wave pressure and
//!   pressure integration over a triangulated hull surface.
//! - [`hydro_model`]: coefficient-based hydrodynamic loads (velocity
//!   products, added mass, control surfaces, propeller, depth tables).
//! - [`guidance`]: Bernstein-polynomial paths/trajectories with
//!   path-following and trajectory-tracking outer loops.
//! - [`autopilot`]: PD depth/heading autopilot and X-plane allocation.
//! - [`l1_adaptive`]: sampled-data adaptive augmentation of the autopilot.
//! - [`sim_engine`]: scenario loading, the closed-loop runner, CSV logs
//!   and summary metrics.
//!
//! # Conventions
//!
//! The body frame is the ship standard: x forward, y starboard, z down.
//! World positions are reported as horizontal (x, y) plus elevation z
//! positive up, so a vehicle 15 m below the calm surface has z = -15.
//! Attitude is ZYX Euler (roll phi, pitch theta, yaw psi); yaw is the
//! angle of the body x-axis in the horizontal plane measured from world
//! x toward world y.

pub mod autopilot;
pub mod guidance;
pub mod hydro_model;
pub mod hydrostatics;
pub mod l1_adaptive;
pub mod linalg;
pub mod rigid_body;
pub mod sim_engine;

/// Seawater density [kg/m^3].
pub const WATER_DENSITY: f64 = 1025.0;
/// Gravitational acceleration [m/s^2].
pub const GRAVITY: f64 = 9.81;

/// Body-frame generalized velocity or force vector [u,v,w,p,q,r] / [X,Y,Z,K,M,N].
pub type Vector6 = nalgebra::SVector<f64, 6>;
pub type Matrix6 = nalgebra::SMatrix<f64, 6, 6>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type Vector2 = nalgebra::Vector2<f64>;
pub type Matrix2 = nalgebra::Matrix2<f64>;
