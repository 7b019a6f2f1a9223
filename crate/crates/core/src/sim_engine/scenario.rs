//! Scenario files: schema, strict validation and loading of every
//! cross-referenced artifact. A scenario either loads completely or
//! fails with a structured report; there are no partial loads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autopilot::{ActuatorLimits, AutopilotGains};
use crate::guidance::{GuidanceCurve, PfGains, SpeedLimits};
use crate::hydro_model::CoefficientSet;
use crate::hydrostatics::{mesh::generate, BuoyancyProperties, HullMesh, WaveParams};
use crate::rigid_body::VehicleState;
use crate::{Vector3, Vector6};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidationIssue {
    /// File the issue belongs to (scenario or a referenced artifact).
    pub path: String,
    /// Field or schema location.
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.path, self.field, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario is not valid JSON at line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("scenario validation failed with {} issue(s)", .0.len())]
    Validation(Vec<ValidationIssue>),
}

impl ScenarioError {
    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            ScenarioError::Validation(v) => v,
            _ => &[],
        }
    }
}

/// Propeller setting: either a fixed shaft rate or a cruise speed the
/// loader converts to a shaft rate through the thrust/drag balance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PropellerSetting {
    N { n: f64 },
    CruiseSpeed { cruise_speed: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EndAction {
    /// Keep the last heading command and shaft rate.
    Hold,
    /// Keep the heading command, stop the propeller.
    Stop,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ControllerSpec {
    /// Direct references: constant depth plus a (possibly ramped)
    /// heading reference.
    Setpoint {
        z_ref: f64,
        #[serde(default)]
        psi_ref_deg: f64,
        /// Heading ramp rate [deg/s] producing a steady turn.
        #[serde(default)]
        psi_rate_deg_s: f64,
        propeller: PropellerSetting,
    },
    PathFollowing {
        path: String,
        #[serde(default = "default_pf_d")]
        d: f64,
        #[serde(default = "default_pf_k_gamma")]
        k_gamma: f64,
        propeller: PropellerSetting,
        /// Depth command when the path file carries no depth profile.
        #[serde(default)]
        z_ref: Option<f64>,
        #[serde(default = "default_end_action")]
        end_action: EndAction,
    },
    TrajectoryTracking {
        path: String,
        #[serde(default = "default_tt_k_p")]
        k_p: f64,
        #[serde(default)]
        v_min: f64,
        #[serde(default = "default_v_max")]
        v_max: f64,
        /// Proportional shaft-rate feedback on the speed error [rev/s per m/s].
        #[serde(default = "default_speed_gain")]
        speed_gain: f64,
        #[serde(default)]
        z_ref: Option<f64>,
    },
}

fn default_pf_d() -> f64 {
    50.0
}
fn default_pf_k_gamma() -> f64 {
    1.0
}
fn default_tt_k_p() -> f64 {
    0.1
}
fn default_v_max() -> f64 {
    15.0
}
fn default_speed_gain() -> f64 {
    0.05
}
fn default_end_action() -> EndAction {
    EndAction::Hold
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutopilotSpec {
    pub gains: AutopilotGains,
    /// When set, the depth-channel gains are interpreted as degrees of
    /// plane command per meter (converted to radians at load). Heading
    /// gains are angle ratios and stay unchanged.
    #[serde(default)]
    pub depth_gains_in_degrees: bool,
    #[serde(default = "default_delta_max_deg")]
    pub delta_max_deg: f64,
    #[serde(default = "default_rate_max_deg_s")]
    pub rate_max_deg_s: f64,
}

fn default_delta_max_deg() -> f64 {
    30.0
}
fn default_rate_max_deg_s() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L1Spec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_omega_n")]
    pub omega_n: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_omega_c_factor")]
    pub omega_c_factor: f64,
    #[serde(default = "default_t_s")]
    pub t_s: f64,
    /// Diagonal of the Lyapunov design matrix Q (identity by default).
    #[serde(default)]
    pub q_diag: Option<[f64; 4]>,
}

fn default_true() -> bool {
    true
}
fn default_omega_n() -> f64 {
    0.08
}
fn default_zeta() -> f64 {
    1.0
}
fn default_omega_c_factor() -> f64 {
    1.5
}
fn default_t_s() -> f64 {
    0.1
}

/// Depth-dependent vertical force and pitch moment injected as an
/// external disturbance (near-surface suction). Flat-clamped outside the
/// knot range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuctionSpec {
    pub depth: Vec<f64>,
    pub z_force: Vec<f64>,
    #[serde(default)]
    pub m_moment: Option<Vec<f64>>,
}

impl SuctionSpec {
    pub fn eval(&self, depth: f64) -> (f64, f64) {
        let interp = |values: &[f64]| -> f64 {
            let n = self.depth.len();
            if depth <= self.depth[0] {
                return values[0];
            }
            if depth >= self.depth[n - 1] {
                return values[n - 1];
            }
            let i = self.depth.partition_point(|&d| d <= depth) - 1;
            let frac = (depth - self.depth[i]) / (self.depth[i + 1] - self.depth[i]);
            values[i] + frac * (values[i + 1] - values[i])
        };
        let z = interp(&self.z_force);
        let m = self.m_moment.as_ref().map(|mm| interp(mm)).unwrap_or(0.0);
        (z, m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DisturbanceSpec {
    #[serde(default)]
    pub suction: Option<SuctionSpec>,
    /// Constant body-frame force/moment bias [X,Y,Z,K,M,N].
    #[serde(default)]
    pub constant_bias: Option<[f64; 6]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSpec {
    File { file: String },
    Builtin { builtin: BuiltinMesh },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinMesh {
    /// Axisymmetric demo hull with a faired sail, generic submarine
    /// principal dimensions.
    DemoSubmarine,
    /// Unit sphere (analytic oracle mesh).
    UnitSphere,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveSpec {
    pub amplitude: f64,
    pub wave_number: f64,
    /// Explicit frequency; omitted means deep-water dispersion.
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub attitude_deg: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 6],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
}

fn default_dt() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorNoiseSpec {
    pub z_std: f64,
    pub psi_std_deg: f64,
}

/// The scenario file as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub coefficients: String,
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    #[serde(default)]
    pub waves: Option<WaveSpec>,
    pub initial: InitialSpec,
    pub controller: ControllerSpec,
    pub autopilot: AutopilotSpec,
    #[serde(default)]
    pub l1: Option<L1Spec>,
    #[serde(default)]
    pub disturbances: Option<DisturbanceSpec>,
    /// Match the weight to the buoyancy at load (mesh-integrated when a
    /// mesh is present).
    #[serde(default = "default_true")]
    pub trim_neutral: bool,
    /// Default artifact directory for runners (overridable on the command
    /// line).
    #[serde(default)]
    pub output_dir: Option<String>,
    pub sim: SimSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensor_noise: Option<SensorNoiseSpec>,
}

/// Controller mode after path resolution and propeller calibration.
#[derive(Debug, Clone)]
pub enum ControllerMode {
    Setpoint {
        z_ref: f64,
        psi_ref: f64,
        psi_rate: f64,
        n: f64,
    },
    PathFollowing {
        curve: GuidanceCurve,
        gains: PfGains,
        n: f64,
        z_ref: Option<f64>,
        end_action: EndAction,
    },
    TrajectoryTracking {
        curve: GuidanceCurve,
        k_p: f64,
        limits: SpeedLimits,
        speed_gain: f64,
        z_ref: Option<f64>,
    },
}

/// A fully validated scenario with every artifact parsed and runtime
/// parameters resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub coefficients: CoefficientSet,
    pub mesh: Option<HullMesh>,
    pub waves: Option<WaveParams>,
    pub initial: VehicleState,
    pub controller: ControllerMode,
    pub gains: AutopilotGains,
    pub limits: ActuatorLimits,
    pub l1: Option<L1Spec>,
    pub disturbances: DisturbanceSpec,
    pub dt: f64,
    pub duration: f64,
    /// L1 sample period as an integer multiple of dt (1 when disabled).
    pub t_s_ratio: usize,
    pub seed: u64,
    pub sensor_noise: Option<SensorNoiseSpec>,
}

/// Solves the self-propulsion balance thrust(n, u) = drag(u) for the
/// shaft rate at a target speed by bisection; thrust grows monotonically
/// with n at fixed u.
pub fn shaft_rate_for_speed(cs: &CoefficientSet, u: f64) -> Result<f64, String> {
    if !(u > 0.0) {
        return Err(format!("cruise speed must be positive, got {u}"));
    }
    let mut s = Vector6::zeros();
    s[0] = u;
    let still = crate::hydro_model::ActuatorState::still();
    let (f, _) = cs.hydrodynamic_force(&s, &still, 1e3);
    let drag = -f.0[0];
    if drag <= 0.0 {
        return Err(format!(
            "hull drag at {u} m/s is not positive ({drag}); cannot calibrate a shaft rate"
        ));
    }
    let n_max = cs.propeller().n_max;
    let thrust = |n: f64| cs.propeller_force(n, u).0[0];
    if thrust(n_max) < drag {
        return Err(format!(
            "propeller cannot reach {u} m/s: max thrust {:.3e} N < drag {drag:.3e} N",
            thrust(n_max)
        ));
    }
    let (mut lo, mut hi) = (1e-6, n_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if thrust(mid) < drag {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn push_issue(issues: &mut Vec<ValidationIssue>, path: &str, field: &str, reason: impl Into<String>) {
    issues.push(ValidationIssue {
        path: path.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    });
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json_str(&text, base, &path.display().to_string())
    }

    pub fn from_json_str(
        text: &str,
        base_dir: &Path,
        display_path: &str,
    ) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| ScenarioError::Json {
                line: e.line(),
                message: e.to_string(),
            })?;
        Self::from_config(config, base_dir, display_path)
    }

    pub fn from_config(
        config: ScenarioConfig,
        base_dir: &Path,
        display_path: &str,
    ) -> Result<Self, ScenarioError> {
        let mut issues: Vec<ValidationIssue> = Vec::new();
        let scen = display_path;

        if config.schema_version != 1 {
            push_issue(
                &mut issues,
                scen,
                "schema_version",
                format!("unsupported version {}", config.schema_version),
            );
        }

        // timing
        let dt = config.sim.dt;
        if !(dt > 0.0) {
            push_issue(&mut issues, scen, "sim.dt", format!("must be > 0, got {dt}"));
        }
        if !(config.sim.duration > 0.0) {
            push_issue(
                &mut issues,
                scen,
                "sim.duration",
                format!("must be > 0, got {}", config.sim.duration),
            );
        }
        let mut t_s_ratio = 1usize;
        if let Some(l1) = &config.l1 {
            if !(l1.t_s > 0.0) {
                push_issue(&mut issues, scen, "l1.t_s", "must be > 0");
            } else if dt > 0.0 {
                let ratio = l1.t_s / dt;
                if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                    push_issue(
                        &mut issues,
                        scen,
                        "l1.t_s",
                        format!(
                            "sample period {} must be an integer multiple of dt {}",
                            l1.t_s, dt
                        ),
                    );
                } else {
                    t_s_ratio = ratio.round() as usize;
                }
            }
            if let Some(q) = &l1.q_diag {
                if q.iter().any(|&v| !(v > 0.0)) {
                    push_issue(&mut issues, scen, "l1.q_diag", "entries must be > 0");
                }
            }
        }

        // autopilot
        if let Err(e) = config.autopilot.gains.validate() {
            push_issue(&mut issues, scen, "autopilot.gains", e);
        }
        let limits = ActuatorLimits {
            delta_max: config.autopilot.delta_max_deg.to_radians(),
            rate_max: config.autopilot.rate_max_deg_s.to_radians(),
        };
        if let Err(e) = limits.validate() {
            push_issue(&mut issues, scen, "autopilot", e);
        }
        let scale = if config.autopilot.depth_gains_in_degrees {
            std::f64::consts::PI / 180.0
        } else {
            1.0
        };
        let gains = AutopilotGains {
            k_pz: config.autopilot.gains.k_pz * scale,
            k_dz: config.autopilot.gains.k_dz * scale,
            k_ppsi: config.autopilot.gains.k_ppsi,
            k_dpsi: config.autopilot.gains.k_dpsi,
        };

        // coefficient file
        let coeff_path = base_dir.join(&config.coefficients);
        let coefficients = match CoefficientSet::load(&coeff_path) {
            Ok(cs) => Some(cs),
            Err(e) => {
                push_issue(
                    &mut issues,
                    &coeff_path.display().to_string(),
                    "coefficients",
                    e.to_string(),
                );
                None
            }
        };

        // mesh
        let mesh = match &config.mesh {
            None => None,
            Some(MeshSpec::Builtin { builtin }) => Some(match builtin {
                BuiltinMesh::DemoSubmarine => generate::demo_submarine(70.2, 9.6, 48, 24),
                BuiltinMesh::UnitSphere => generate::unit_sphere(4),
            }),
            Some(MeshSpec::File { file }) => {
                let mesh_path = base_dir.join(file);
                match HullMesh::load(&mesh_path) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        push_issue(
                            &mut issues,
                            &mesh_path.display().to_string(),
                            "mesh",
                            e.to_string(),
                        );
                        None
                    }
                }
            }
        };

        // waves
        let waves = match &config.waves {
            None => None,
            Some(ws) => {
                if config.mesh.is_none() {
                    push_issue(
                        &mut issues,
                        scen,
                        "waves",
                        "wave loads require a hull mesh",
                    );
                }
                let wp = match ws.omega {
                    Some(omega) => WaveParams::new(ws.amplitude, ws.wave_number, omega),
                    None => WaveParams::deep_water(ws.amplitude, ws.wave_number),
                };
                match wp {
                    Ok(w) => Some(w),
                    Err(e) => {
                        push_issue(&mut issues, scen, "waves", e.to_string());
                        None
                    }
                }
            }
        };

        // initial state
        let att = Vector3::new(
            config.initial.attitude_deg[0].to_radians(),
            config.initial.attitude_deg[1].to_radians(),
            config.initial.attitude_deg[2].to_radians(),
        );
        if att.y.abs() >= std::f64::consts::FRAC_PI_2 - 1e-3 {
            push_issue(
                &mut issues,
                scen,
                "initial.attitude_deg",
                "pitch too close to +/-90 deg",
            );
        }
        let initial = VehicleState::new(
            Vector3::from_column_slice(&config.initial.position),
            att,
            Vector6::from_column_slice(&config.initial.velocity),
        );

        // disturbances
        if let Some(d) = &config.disturbances {
            if let Some(s) = &d.suction {
                if s.depth.len() < 2
                    || s.depth.len() != s.z_force.len()
                    || s.m_moment.as_ref().is_some_and(|m| m.len() != s.depth.len())
                {
                    push_issue(
                        &mut issues,
                        scen,
                        "disturbances.suction",
                        "depth/z_force/m_moment must share a length >= 2",
                    );
                } else if !s.depth.windows(2).all(|w| w[0] < w[1]) {
                    push_issue(
                        &mut issues,
                        scen,
                        "disturbances.suction.depth",
                        "must be strictly increasing",
                    );
                }
            }
        }

        // controller: resolve paths and shaft rates (needs coefficients)
        let controller = match (&config.controller, &coefficients) {
            (_, None) => None,
            (ControllerSpec::Setpoint { z_ref, psi_ref_deg, psi_rate_deg_s, propeller }, Some(cs)) => {
                resolve_propeller(propeller, cs)
                    .map_err(|e| push_issue(&mut issues, scen, "controller.propeller", e))
                    .ok()
                    .map(|n| ControllerMode::Setpoint {
                        z_ref: *z_ref,
                        psi_ref: psi_ref_deg.to_radians(),
                        psi_rate: psi_rate_deg_s.to_radians(),
                        n,
                    })
            }
            (
                ControllerSpec::PathFollowing { path, d, k_gamma, propeller, z_ref, end_action },
                Some(cs),
            ) => {
                let pf_gains = PfGains { d: *d, k_gamma: *k_gamma };
                if let Err(e) = pf_gains.validate() {
                    push_issue(&mut issues, scen, "controller", e);
                }
                let curve_path = base_dir.join(path);
                let curve = crate::guidance::load_curve(&curve_path)
                    .map_err(|e| {
                        push_issue(
                            &mut issues,
                            &curve_path.display().to_string(),
                            "path",
                            e.to_string(),
                        )
                    })
                    .ok();
                let n = resolve_propeller(propeller, cs)
                    .map_err(|e| push_issue(&mut issues, scen, "controller.propeller", e))
                    .ok();
                match (curve, n) {
                    (Some(curve), Some(n)) => Some(ControllerMode::PathFollowing {
                        curve,
                        gains: pf_gains,
                        n,
                        z_ref: *z_ref,
                        end_action: *end_action,
                    }),
                    _ => None,
                }
            }
            (
                ControllerSpec::TrajectoryTracking { path, k_p, v_min, v_max, speed_gain, z_ref },
                Some(_),
            ) => {
                if !(*k_p > 0.0) {
                    push_issue(&mut issues, scen, "controller.k_p", "must be > 0");
                }
                if !(v_max > v_min) || *v_min < 0.0 {
                    push_issue(
                        &mut issues,
                        scen,
                        "controller.v_min/v_max",
                        format!("need 0 <= v_min < v_max, got {v_min}/{v_max}"),
                    );
                }
                let curve_path = base_dir.join(path);
                crate::guidance::load_curve(&curve_path)
                    .map_err(|e| {
                        push_issue(
                            &mut issues,
                            &curve_path.display().to_string(),
                            "trajectory",
                            e.to_string(),
                        )
                    })
                    .ok()
                    .map(|curve| ControllerMode::TrajectoryTracking {
                        curve,
                        k_p: *k_p,
                        limits: SpeedLimits {
                            v_min: *v_min,
                            v_max: *v_max,
                        },
                        speed_gain: *speed_gain,
                        z_ref: *z_ref,
                    })
            }
        };

        // depth commands must exist: either the curve carries a profile or
        // the scenario names z_ref
        if let Some(ControllerMode::PathFollowing { curve, z_ref, .. })
        | Some(ControllerMode::TrajectoryTracking { curve, z_ref, .. }) = &controller
        {
            if z_ref.is_none() && curve.depth(0.0).ok().flatten().is_none() {
                push_issue(
                    &mut issues,
                    scen,
                    "controller.z_ref",
                    "no depth profile in the path file and no z_ref fallback",
                );
            }
        }

        if !issues.is_empty() {
            return Err(ScenarioError::Validation(issues));
        }
        let mut coefficients = coefficients.expect("validated");

        // neutral trim: weight matched to buoyancy (mesh-integrated when
        // a mesh is present)
        if config.trim_neutral {
            let bp = match &mesh {
                Some(m) => BuoyancyProperties::from_mesh(m),
                None => *coefficients.buoyancy(),
            };
            coefficients.trim_neutral(bp);
        }

        Ok(Scenario {
            initial,
            controller: controller.expect("validated"),
            gains,
            limits,
            l1: config.l1.clone(),
            disturbances: config.disturbances.clone().unwrap_or_default(),
            dt: config.sim.dt,
            duration: config.sim.duration,
            t_s_ratio,
            seed: config.seed,
            sensor_noise: config.sensor_noise.clone(),
            coefficients,
            mesh,
            waves,
            config,
        })
    }
}

fn resolve_propeller(spec: &PropellerSetting, cs: &CoefficientSet) -> Result<f64, String> {
    match spec {
        PropellerSetting::N { n } => {
            if n.abs() > cs.propeller().n_max {
                Err(format!(
                    "shaft rate {n} exceeds n_max {}",
                    cs.propeller().n_max
                ))
            } else {
                Ok(*n)
            }
        }
        PropellerSetting::CruiseSpeed { cruise_speed } => shaft_rate_for_speed(cs, *cruise_speed),
    }
}
