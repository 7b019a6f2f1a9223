//! Closed-loop runner: fixed-step co-simulation of the plant with the
//! guidance, autopilot and sampled-data augmentation layers at their
//! respective rates.

use nalgebra::{DMatrix, DVector, SVector};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::autopilot::{allocate, apply_limits, pd_commands, wrap_angle, PdFeedback};
use crate::guidance::{
    pf_error, pf_gamma_rate, pf_orientation_cmd, tt_commands, tt_error,
    GuidanceError,
};
use crate::hydro_model::ActuatorState;
use crate::hydrostatics::{
    hydrostatic_restoring, integrate_wave_loads, BuoyancyProperties, Pose,
};
use crate::l1_adaptive::{L1Config, L1Controller, L1Error};
use crate::rigid_body::{
    assemble_mass_matrix, coupling_split, kinematics, rk4_step_vec, solve_accelerations,
    RigidBodyError, VehicleState,
};
use crate::{Matrix6, Vector2, Vector3, Vector6};

use super::logging::{ForceBreakdown, Record, TimeSeriesLog};
use super::scenario::{ControllerMode, EndAction, Scenario};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("at t = {time:.3} s: {source}")]
    RigidBody {
        time: f64,
        source: RigidBodyError,
    },
    #[error("at t = {time:.3} s: {source}")]
    Guidance {
        time: f64,
        source: GuidanceError,
    },
    #[error("controller setup: {0}")]
    L1(#[from] L1Error),
}

/// Everything needed to evaluate external loads on the vehicle; pure and
/// shared by the logger and the integrator stages.
pub struct PlantModel<'a> {
    scenario: &'a Scenario,
    mp: crate::rigid_body::MassProperties,
    bp: BuoyancyProperties,
    weight_only: BuoyancyProperties,
    m_rb: Matrix6,
    /// Mesh integration active (waves with nonzero amplitude).
    wave_active: bool,
}

impl<'a> PlantModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let mp = *scenario.coefficients.mass_properties();
        let bp = *scenario.coefficients.buoyancy();
        let wave_active = scenario.mesh.is_some()
            && scenario.waves.map(|w| w.amplitude > 0.0).unwrap_or(false);
        Self {
            scenario,
            mp,
            bp,
            weight_only: BuoyancyProperties {
                force: 0.0,
                cb: bp.cb,
            },
            m_rb: assemble_mass_matrix(&mp),
            wave_active,
        }
    }

    pub fn mass_properties(&self) -> &crate::rigid_body::MassProperties {
        &self.mp
    }

    /// External load breakdown and the added-mass matrix at one instant.
    pub fn force_breakdown(
        &self,
        t: f64,
        state: &VehicleState,
        act: &ActuatorState,
    ) -> (ForceBreakdown, Matrix6) {
        let depth = state.depth();
        let mut act_no_prop = *act;
        act_no_prop.n = 0.0;
        let (hydro, a_added) =
            self.scenario
                .coefficients
                .hydrodynamic_force(&state.velocity, &act_no_prop, depth);
        let propeller = self
            .scenario
            .coefficients
            .propeller_force(act.n, state.velocity[0]);

        let (hydrostatic, wave) = if self.wave_active {
            let mesh = self.scenario.mesh.as_ref().expect("wave_active");
            let wp = self.scenario.waves.expect("wave_active");
            let pose = Pose {
                position: state.position,
                attitude: state.attitude,
            };
            let calm = integrate_wave_loads(mesh, &pose, t, &wp.calm());
            let total = integrate_wave_loads(mesh, &pose, t, &wp);
            let weight = hydrostatic_restoring(&self.mp, &self.weight_only, &state.attitude);
            (weight + calm, total - calm)
        } else {
            (
                hydrostatic_restoring(&self.mp, &self.bp, &state.attitude),
                crate::rigid_body::GeneralizedForce::zero(),
            )
        };

        let mut disturbance = Vector6::zeros();
        if let Some(s) = &self.scenario.disturbances.suction {
            let (z_force, m_moment) = s.eval(depth);
            disturbance[2] += z_force;
            disturbance[4] += m_moment;
        }
        if let Some(bias) = self.scenario.disturbances.constant_bias {
            disturbance += Vector6::from_column_slice(&bias);
        }

        (
            ForceBreakdown {
                hydrostatic: hydrostatic.0,
                hydrodynamic: hydro.0,
                wave: wave.0,
                propeller: propeller.0,
                disturbance,
            },
            a_added,
        )
    }

    /// Body accelerations from the effective-mass solve.
    pub fn accelerations(
        &self,
        t: f64,
        state: &VehicleState,
        act: &ActuatorState,
    ) -> Result<Vector6, RigidBodyError> {
        let (bd, a_added) = self.force_breakdown(t, state, act);
        let (b_vel, b_acc) = coupling_split(&self.mp, &state.velocity);
        let m_eff = self.m_rb + b_acc - a_added;
        solve_accelerations(&m_eff, &(bd.total() - b_vel))
    }
}

/// Horizontal-plane speed and flow direction; falls back to the heading
/// axis when nearly at rest.
fn horizontal_flow(state: &VehicleState) -> Result<(f64, Vector2), RigidBodyError> {
    let (pos_rate, _) = kinematics(state)?;
    let v = (pos_rate.x * pos_rate.x + pos_rate.y * pos_rate.y).sqrt();
    let w1 = if v > 1e-9 {
        Vector2::new(pos_rate.x / v, pos_rate.y / v)
    } else {
        Vector2::new(state.attitude.z.cos(), state.attitude.z.sin())
    };
    Ok((v, w1))
}

fn pack13(state: &VehicleState, gamma: f64) -> SVector<f64, 13> {
    let mut y = SVector::<f64, 13>::zeros();
    for i in 0..3 {
        y[i] = state.position[i];
        y[3 + i] = state.attitude[i];
    }
    for i in 0..6 {
        y[6 + i] = state.velocity[i];
    }
    y[12] = gamma;
    y
}

fn unpack13(y: &SVector<f64, 13>) -> (VehicleState, f64) {
    (
        VehicleState {
            position: Vector3::new(y[0], y[1], y[2]),
            attitude: Vector3::new(y[3], y[4], y[5]),
            velocity: Vector6::from_fn(|i, _| y[6 + i]),
        },
        y[12],
    )
}

struct GuidanceOutput {
    psi_c: f64,
    v_c: f64,
    z_c: f64,
    err: [f64; 2],
    gamma_rate: f64,
    n: f64,
}

/// Runs the scenario to completion, producing one log row per time step
/// plus the final state. Deterministic: identical scenarios yield
/// byte-identical CSV output.
pub fn run(scenario: &Scenario) -> Result<TimeSeriesLog, EngineError> {
    let plant = PlantModel::new(scenario);
    let dt = scenario.dt;

    // trajectory tracking terminates exactly at the trajectory's final
    // time
    let duration = match &scenario.controller {
        ControllerMode::TrajectoryTracking { curve, .. } => {
            scenario.duration.min(curve.domain_end())
        }
        _ => scenario.duration,
    };
    let n_steps = (duration / dt).round() as usize;

    let mut l1: Option<L1Controller> = None;
    let mut state = scenario.initial;
    let mut gamma = 0.0f64;
    let mut psi_cont = state.attitude.z;
    let mut prev_deltas = [0.0f64; 5];
    let mut last_psi_c = psi_cont;
    let mut last_z_c = match &scenario.controller {
        ControllerMode::Setpoint { z_ref, .. } => *z_ref,
        ControllerMode::PathFollowing { curve, z_ref, .. }
        | ControllerMode::TrajectoryTracking { curve, z_ref, .. } => curve
            .depth(0.0)
            .ok()
            .flatten()
            .or(*z_ref)
            .unwrap_or(state.position.z),
    };
    let mut held_u_ad: (f64, f64) = (psi_cont, last_z_c);
    let mut path_done = false;
    let mut records = Vec::with_capacity(n_steps + 1);

    let mut noise_rng = rand_chacha::ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = scenario.sensor_noise.as_ref().map(|n| {
        (
            Normal::new(0.0, n.z_std).expect("validated std"),
            Normal::new(0.0, n.psi_std_deg.to_radians()).expect("validated std"),
        )
    });

    let n_max = scenario.coefficients.propeller().n_max;

    for k in 0..=n_steps {
        let t = k as f64 * dt;

        // measurements
        let (pos_rate, euler_rate) = kinematics(&state)
            .map_err(|source| EngineError::RigidBody { time: t, source })?;
        let (v_horiz, w1) = horizontal_flow(&state)
            .map_err(|source| EngineError::RigidBody { time: t, source })?;
        let (mut z_meas, mut psi_meas) = (state.position.z, psi_cont);
        if let Some((nz, npsi)) = &noise {
            z_meas += nz.sample(&mut noise_rng);
            psi_meas += npsi.sample(&mut noise_rng);
        }
        let fb = PdFeedback {
            z: z_meas,
            z_rate: pos_rate.z,
            psi: psi_meas,
            psi_rate: euler_rate.z,
        };

        // outer loop
        let guidance = step_guidance(
            scenario,
            t,
            &state,
            gamma,
            v_horiz,
            &w1,
            psi_cont,
            &mut last_psi_c,
            &mut last_z_c,
            &mut path_done,
        )
        .map_err(|source| EngineError::Guidance { time: t, source })?;

        // sampled-data augmentation
        let (psi_ad, z_ad, sigma) = match (&scenario.l1, scenario.l1.as_ref().map(|s| s.enabled)) {
            (Some(spec), Some(true)) => {
                if l1.is_none() {
                    let q = DMatrix::from_diagonal(&DVector::from_column_slice(
                        &spec.q_diag.unwrap_or([1.0; 4]),
                    ));
                    let config =
                        L1Config::standard(spec.omega_n, spec.zeta, spec.omega_c_factor, spec.t_s);
                    let y0 = DVector::from_column_slice(&[psi_meas, z_meas]);
                    l1 = Some(L1Controller::new(&config, &q, &y0)?);
                }
                let ctrl = l1.as_mut().expect("initialized above");
                if k % scenario.t_s_ratio == 0 {
                    let y = DVector::from_column_slice(&[psi_meas, z_meas]);
                    let u_ref = DVector::from_column_slice(&[guidance.psi_c, guidance.z_c]);
                    let u_d = ctrl.sample(&y, &u_ref);
                    held_u_ad = (u_d[0], u_d[1]);
                }
                let s = &ctrl.state.sigma;
                (held_u_ad.0, held_u_ad.1, [s[0], s[1], s[2], s[3]])
            }
            _ => (guidance.psi_c, guidance.z_c, [0.0; 4]),
        };

        // inner loop
        let (delta_v, delta_h) = pd_commands(z_ad, 0.0, psi_ad, 0.0, &fb, &scenario.gains);
        let cmd = allocate(delta_v, delta_h);
        let deltas = apply_limits(&cmd, &prev_deltas, dt, &scenario.limits);
        let n_prop = guidance.n.clamp(-n_max, n_max);
        let act = ActuatorState {
            deltas,
            n: n_prop,
        };

        let (forces, _) = plant.force_breakdown(t, &state, &act);
        records.push(Record {
            t,
            state,
            gamma,
            gamma_rate: guidance.gamma_rate,
            err: guidance.err,
            psi_c: guidance.psi_c,
            v_c: guidance.v_c,
            z_c: guidance.z_c,
            psi_ad,
            z_ad,
            sigma,
            deltas,
            delta_v,
            delta_h,
            n_prop,
            forces,
        });

        if k == n_steps {
            break;
        }

        // plant + virtual time advance as one ODE with the controls held
        let psi_before = state.attitude.z;
        let y0 = pack13(&state, gamma);
        let y1 = rk4_step_vec(t, &y0, dt, |tt, y| -> Result<_, EngineError> {
            let (st, g) = unpack13(y);
            let (pos_rate, euler_rate) =
                kinematics(&st).map_err(|source| EngineError::RigidBody { time: tt, source })?;
            let acc = plant
                .accelerations(tt, &st, &act)
                .map_err(|source| EngineError::RigidBody { time: tt, source })?;
            let g_rate = match &scenario.controller {
                ControllerMode::PathFollowing { curve, gains, .. } => {
                    let g_clamped = g.clamp(0.0, curve.domain_end());
                    let (v, w1) = horizontal_flow(&st)
                        .map_err(|source| EngineError::RigidBody { time: tt, source })?;
                    let p_xy = Vector2::new(st.position.x, st.position.y);
                    pf_gamma_rate(&p_xy, g_clamped, curve, v, &w1, gains.k_gamma)
                        .map_err(|source| EngineError::Guidance { time: tt, source })?
                }
                ControllerMode::TrajectoryTracking { .. } => 1.0,
                ControllerMode::Setpoint { .. } => 0.0,
            };
            let mut dy = SVector::<f64, 13>::zeros();
            for i in 0..3 {
                dy[i] = pos_rate[i];
                dy[3 + i] = euler_rate[i];
            }
            for i in 0..6 {
                dy[6 + i] = acc[i];
            }
            dy[12] = g_rate;
            Ok(dy)
        })?;

        let (mut next, mut next_gamma) = unpack13(&y1);
        psi_cont += next.attitude.z - psi_before;
        next.wrap_attitude();
        if let ControllerMode::PathFollowing { curve, .. } = &scenario.controller {
            next_gamma = next_gamma.clamp(0.0, curve.domain_end());
        }
        state = next;
        gamma = next_gamma;
        prev_deltas = deltas;
    }

    Ok(TimeSeriesLog { records, dt })
}

#[allow(clippy::too_many_arguments)]
fn step_guidance(
    scenario: &Scenario,
    t: f64,
    state: &VehicleState,
    gamma: f64,
    v_horiz: f64,
    w1: &Vector2,
    psi_cont: f64,
    last_psi_c: &mut f64,
    last_z_c: &mut f64,
    path_done: &mut bool,
) -> Result<GuidanceOutput, GuidanceError> {
    // heading commands continuized against the vehicle's unwrapped yaw so
    // the predictor and PD never see 2 pi jumps
    let continuize = |psi: f64| psi_cont + wrap_angle(psi - psi_cont);
    let p_xy = Vector2::new(state.position.x, state.position.y);

    match &scenario.controller {
        ControllerMode::Setpoint {
            z_ref,
            psi_ref,
            psi_rate,
            n,
        } => Ok(GuidanceOutput {
            psi_c: psi_ref + psi_rate * t,
            v_c: 0.0,
            z_c: *z_ref,
            err: [0.0; 2],
            gamma_rate: 0.0,
            n: *n,
        }),
        ControllerMode::PathFollowing {
            curve,
            gains,
            n,
            z_ref,
            end_action,
        } => {
            let t_end = curve.domain_end();
            if gamma >= t_end - 1e-9 {
                *path_done = true;
            }
            if *path_done {
                let n_out = match end_action {
                    EndAction::Hold => *n,
                    EndAction::Stop => 0.0,
                };
                return Ok(GuidanceOutput {
                    psi_c: *last_psi_c,
                    v_c: 0.0,
                    z_c: *last_z_c,
                    err: [0.0; 2],
                    gamma_rate: 0.0,
                    n: n_out,
                });
            }
            let (x_t, y_t) = pf_error(&p_xy, gamma, curve)?;
            let (_, psi_c_raw) = pf_orientation_cmd(gamma, curve, y_t, gains.d)?;
            let psi_c = continuize(psi_c_raw);
            let gamma_rate = pf_gamma_rate(&p_xy, gamma, curve, v_horiz, w1, gains.k_gamma)?;
            let z_c = curve.depth(gamma)?.or(*z_ref).expect("validated depth");
            *last_psi_c = psi_c;
            *last_z_c = z_c;
            Ok(GuidanceOutput {
                psi_c,
                v_c: 0.0,
                z_c,
                err: [x_t, y_t],
                gamma_rate,
                n: *n,
            })
        }
        ControllerMode::TrajectoryTracking {
            curve,
            k_p,
            limits,
            speed_gain,
            z_ref,
        } => {
            let t_cl = t.min(curve.domain_end());
            let e_p = tt_error(&p_xy, t_cl, curve)?;
            let (v_c, psi_c) = match tt_commands(&e_p, t_cl, curve, *k_p, w1, limits) {
                Ok((v_c, _, psi_c_raw)) => (v_c, continuize(psi_c_raw)),
                // target on top and stationary: hold the previous heading
                Err(GuidanceError::DegenerateCommand { .. }) => {
                    (curve.speed(t_cl)?, *last_psi_c)
                }
                Err(e) => return Err(e),
            };
            let z_c = curve.depth(t_cl)?.or(*z_ref).expect("validated depth");
            *last_psi_c = psi_c;
            *last_z_c = z_c;
            // shaft rate: thrust/drag feedforward plus proportional speed
            // feedback
            let n_ff =
                super::scenario::shaft_rate_for_speed(&scenario.coefficients, v_c.max(0.1))
                    .unwrap_or(scenario.coefficients.propeller().n_max);
            let n = (n_ff + speed_gain * (v_c - state.velocity[0])).max(0.0);
            Ok(GuidanceOutput {
                psi_c,
                v_c,
                z_c,
                err: [e_p.x, e_p.y],
                gamma_rate: 1.0,
                n,
            })
        }
    }
}
