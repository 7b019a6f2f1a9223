//! Coefficient-based hydrodynamic loads: velocity-product terms, added
//! mass, control-surface forces, propeller thrust/torque and depth
//! corrections.
//!
//! A load breaks down as
//!
//! ```text
//! F_i = sum F'_{i,jk} s_j s_k  +  sum F'_{i,sdot_j} sdot_j
//!     + sum F'_{i,dl} u^2 g(d_l)  +  F_{i,prop}
//! ```
//!
//! with the acceleration group returned as a matrix for assembly on the
//! left-hand side of the equations of motion. Velocity indices are
//! 0..5 = [u,v,w,p,q,r] and axes 0..5 = [X,Y,Z,K,M,N].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydrostatics::BuoyancyProperties;
use crate::rigid_body::{assemble_mass_matrix, coupling_split, GeneralizedForce, MassProperties};
use crate::{Matrix6, Vector3, Vector6, WATER_DENSITY};

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("coefficient file {field}: {reason}")]
    Schema { field: String, reason: String },
    #[error("coefficient file is not valid JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("coefficient io: {0}")]
    Io(#[from] std::io::Error),
    #[error("actuator state out of limits: {0}")]
    ActuatorLimit(String),
}

fn schema_err<T>(field: &str, reason: impl Into<String>) -> Result<T, CoeffError> {
    Err(CoeffError::Schema {
        field: field.to_string(),
        reason: reason.into(),
    })
}

/// Deflection-to-force law for a control-surface term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeflectionLaw {
    /// g(d) = d, sign-reversible linear lift (default).
    #[default]
    Linear,
    /// g(d) = d^2, the sign-less literal form.
    LiteralSquared,
    /// g(d) = d |d|.
    SignedQuadratic,
}

impl DeflectionLaw {
    pub fn eval(&self, delta: f64) -> f64 {
        match self {
            DeflectionLaw::Linear => delta,
            DeflectionLaw::LiteralSquared => delta * delta,
            DeflectionLaw::SignedQuadratic => delta * delta.abs(),
        }
    }
}

/// One velocity-product coefficient `F'_{axis, s_j s_k}`; with `signed`
/// the product is evaluated as `|s_j| s_k`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadTerm {
    pub axis: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: f64,
    #[serde(default)]
    pub signed: bool,
}

/// One control-surface coefficient `F'_{axis, delta_l}` acting as
/// `coeff * u^2 * g(delta_l)`. Surfaces are numbered 1..=5 (stern planes
/// then sail).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurfaceTerm {
    pub axis: usize,
    pub surface: usize,
    pub coeff: f64,
    #[serde(default)]
    pub law: DeflectionLaw,
}

/// Open-water propeller model: thrust `X = rho n^2 D^4 Kt(J)` and torque
/// `K = rho n^2 D^5 Kq(J)` with advance ratio `J = u / (n D)` and Kt, Kq
/// polynomials in J.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropellerModel {
    pub diameter: f64,
    /// Kt polynomial coefficients, constant term first.
    pub kt: Vec<f64>,
    /// Kq polynomial coefficients, constant term first.
    pub kq: Vec<f64>,
    /// Advance-ratio validity range; J is clamped to it with a warning.
    pub j_range: [f64; 2],
    /// Max shaft rate magnitude [rev/s].
    pub n_max: f64,
}

impl PropellerModel {
    fn validate(&self) -> Result<(), CoeffError> {
        if !(self.diameter > 0.0) {
            return schema_err("propeller.diameter", "must be > 0");
        }
        if self.kt.is_empty() || self.kq.is_empty() {
            return schema_err("propeller.kt/kq", "polynomials must be non-empty");
        }
        if !(self.j_range[0] < self.j_range[1]) {
            return schema_err("propeller.j_range", "must satisfy j_range[0] < j_range[1]");
        }
        if !(self.n_max > 0.0) {
            return schema_err("propeller.n_max", "must be > 0");
        }
        Ok(())
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Which coefficient a depth table scales.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "group", rename_all = "snake_case")]
pub enum DepthTarget {
    /// Entry of `quad_terms` by list index.
    Quad { index: usize },
    /// Entry of the added-mass matrix.
    AddedMass { row: usize, col: usize },
    /// Entry of `surface_terms` by list index.
    Surface { index: usize },
}

/// Piecewise-linear multiplier versus depth [m, positive down]. Beyond the
/// deepest knot the multiplier is exactly 1 (deep-water value); above the
/// shallowest knot it holds the first value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthTable {
    pub target: DepthTarget,
    pub depth: Vec<f64>,
    pub multiplier: Vec<f64>,
}

impl DepthTable {
    pub fn eval(&self, depth: f64) -> f64 {
        let n = self.depth.len();
        if depth >= self.depth[n - 1] {
            return 1.0;
        }
        if depth <= self.depth[0] {
            return self.multiplier[0];
        }
        let i = self.depth.partition_point(|&d| d <= depth) - 1;
        let frac = (depth - self.depth[i]) / (self.depth[i + 1] - self.depth[i]);
        self.multiplier[i] + frac * (self.multiplier[i + 1] - self.multiplier[i])
    }

    fn validate(&self, label: &str, n_quad: usize, n_surface: usize) -> Result<(), CoeffError> {
        if self.depth.len() < 2 || self.depth.len() != self.multiplier.len() {
            return schema_err(
                label,
                format!(
                    "depth/multiplier must have equal length >= 2, got {}/{}",
                    self.depth.len(),
                    self.multiplier.len()
                ),
            );
        }
        if !self.depth.windows(2).all(|w| w[0] < w[1]) {
            return schema_err(label, "depth grid must be strictly increasing");
        }
        let last = *self.multiplier.last().unwrap();
        if (last - 1.0).abs() > 1e-9 {
            return schema_err(
                label,
                format!("deepest multiplier must be 1.0 (deep-water value), got {last}"),
            );
        }
        match self.target {
            DepthTarget::Quad { index } if index >= n_quad => {
                schema_err(label, format!("quad index {index} out of range {n_quad}"))
            }
            DepthTarget::Surface { index } if index >= n_surface => schema_err(
                label,
                format!("surface index {index} out of range {n_surface}"),
            ),
            DepthTarget::AddedMass { row, col } if row >= 6 || col >= 6 => {
                schema_err(label, format!("added-mass entry ({row},{col}) out of range"))
            }
            _ => Ok(()),
        }
    }
}

/// Unit convention of the stored coefficients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "convention", rename_all = "snake_case")]
pub enum UnitConvention {
    /// Coefficients are dimensional SI (N, N m and compatible products).
    DimensionalSi,
    /// Non-dimensional prime system on the given reference length;
    /// converted to dimensional at load with factors of (rho/2) L^n.
    Prime { ref_length: f64 },
}

/// Control-surface deflections and propeller rate with limit checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorState {
    pub deltas: [f64; 5],
    pub n: f64,
}

impl ActuatorState {
    pub fn new(deltas: [f64; 5], n: f64, delta_max: f64, n_max: f64) -> Result<Self, CoeffError> {
        for (i, d) in deltas.iter().enumerate() {
            if d.abs() > delta_max + 1e-12 {
                return Err(CoeffError::ActuatorLimit(format!(
                    "plane {} deflection {d} exceeds {delta_max}",
                    i + 1
                )));
            }
        }
        if n.abs() > n_max + 1e-12 {
            return Err(CoeffError::ActuatorLimit(format!(
                "propeller rate {n} exceeds {n_max}"
            )));
        }
        Ok(Self { deltas, n })
    }

    pub fn still() -> Self {
        Self {
            deltas: [0.0; 5],
            n: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoefficientFile {
    schema_version: u32,
    name: String,
    #[serde(default)]
    notes: String,
    units: UnitConvention,
    origin: String,
    mass: MassBlock,
    buoyancy: BuoyancyBlock,
    added_mass: Vec<Vec<f64>>,
    #[serde(default = "default_symmetry_tol")]
    added_mass_symmetry_tol: f64,
    #[serde(default)]
    quad_terms: Vec<QuadTerm>,
    #[serde(default)]
    surface_terms: Vec<SurfaceTerm>,
    propeller: PropellerModel,
    #[serde(default)]
    depth_tables: Vec<DepthTable>,
}

fn default_symmetry_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MassBlock {
    #[serde(default)]
    mass_kg: Option<f64>,
    #[serde(default)]
    displacement_m3: Option<f64>,
    cg: [f64; 3],
    gyration: [f64; 3],
    #[serde(default)]
    products_of_inertia: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BuoyancyBlock {
    #[serde(default)]
    force_n: Option<f64>,
    #[serde(default)]
    volume_m3: Option<f64>,
    cb: [f64; 3],
}

/// Full hydrodynamic parameterization of one vehicle, loaded from a
/// schema-versioned JSON file and validated before use. All stored
/// coefficients are dimensional SI regardless of the file convention.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub notes: String,
    pub origin: String,
    mass_properties: MassProperties,
    buoyancy: BuoyancyProperties,
    added_mass: Matrix6,
    quad_terms: Vec<QuadTerm>,
    surface_terms: Vec<SurfaceTerm>,
    propeller: PropellerModel,
    depth_tables: Vec<DepthTable>,
}

impl CoefficientSet {
    pub fn from_json_str(text: &str) -> Result<Self, CoeffError> {
        let file: CoefficientFile = serde_json::from_str(text).map_err(|e| CoeffError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CoeffError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn from_file(file: CoefficientFile) -> Result<Self, CoeffError> {
        if file.schema_version != 1 {
            return schema_err(
                "schema_version",
                format!("unsupported version {}", file.schema_version),
            );
        }

        let mass = match (file.mass.mass_kg, file.mass.displacement_m3) {
            (Some(m), None) => m,
            (None, Some(vol)) => WATER_DENSITY * vol,
            _ => {
                return schema_err(
                    "mass",
                    "exactly one of mass_kg or displacement_m3 must be given",
                )
            }
        };
        let mp = MassProperties::new(
            mass,
            Vector3::from_column_slice(&file.mass.cg),
            Vector3::from_column_slice(&file.mass.gyration),
            Vector3::from_column_slice(&file.mass.products_of_inertia),
        )
        .map_err(|e| CoeffError::Schema {
            field: "mass".into(),
            reason: e.to_string(),
        })?;

        let b_force = match (file.buoyancy.force_n, file.buoyancy.volume_m3) {
            (Some(f), None) => f,
            (None, Some(vol)) => WATER_DENSITY * crate::GRAVITY * vol,
            _ => {
                return schema_err(
                    "buoyancy",
                    "exactly one of force_n or volume_m3 must be given",
                )
            }
        };
        let buoyancy =
            BuoyancyProperties::new(b_force, Vector3::from_column_slice(&file.buoyancy.cb))
                .map_err(|e| CoeffError::Schema {
                    field: "buoyancy".into(),
                    reason: e.to_string(),
                })?;

        if file.added_mass.len() != 6 || file.added_mass.iter().any(|r| r.len() != 6) {
            return schema_err("added_mass", "must be a 6x6 matrix");
        }
        let mut added = Matrix6::zeros();
        for (i, row) in file.added_mass.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return schema_err("added_mass", format!("entry ({i},{j}) is not finite"));
                }
                added[(i, j)] = v;
            }
        }

        for (idx, term) in file.quad_terms.iter().enumerate() {
            if term.axis > 5 || term.j > 5 || term.k > 5 {
                return schema_err(
                    &format!("quad_terms[{idx}]"),
                    format!(
                        "indices out of range: axis={} j={} k={}",
                        term.axis, term.j, term.k
                    ),
                );
            }
            if !term.coeff.is_finite() {
                return schema_err(&format!("quad_terms[{idx}].coeff"), "must be finite");
            }
        }
        for (idx, term) in file.surface_terms.iter().enumerate() {
            if term.axis > 5 || term.surface == 0 || term.surface > 5 {
                return schema_err(
                    &format!("surface_terms[{idx}]"),
                    format!(
                        "indices out of range: axis={} surface={}",
                        term.axis, term.surface
                    ),
                );
            }
            if !term.coeff.is_finite() {
                return schema_err(&format!("surface_terms[{idx}].coeff"), "must be finite");
            }
        }
        file.propeller.validate()?;
        for (idx, table) in file.depth_tables.iter().enumerate() {
            table.validate(
                &format!("depth_tables[{idx}]"),
                file.quad_terms.len(),
                file.surface_terms.len(),
            )?;
        }

        let mut set = Self {
            name: file.name,
            notes: file.notes,
            origin: file.origin,
            mass_properties: mp,
            buoyancy,
            added_mass: added,
            quad_terms: file.quad_terms,
            surface_terms: file.surface_terms,
            propeller: file.propeller,
            depth_tables: file.depth_tables,
        };

        if let UnitConvention::Prime { ref_length } = file.units {
            if !(ref_length > 0.0) {
                return schema_err("units.ref_length", "must be > 0");
            }
            set.dimensionalize(ref_length);
        }

        set.validate(file.added_mass_symmetry_tol)?;
        Ok(set)
    }

    /// Converts prime-system coefficients to dimensional SI in place. The
    /// quadratic model is velocity-homogeneous, so only (rho/2) L^n factors
    /// appear: one extra length per moment axis and per angular index.
    fn dimensionalize(&mut self, l: f64) {
        let half_rho = 0.5 * WATER_DENSITY;
        let moment = |axis: usize| -> i32 { if axis >= 3 { 1 } else { 0 } };
        let angular = |idx: usize| -> i32 { if idx >= 3 { 1 } else { 0 } };
        for term in &mut self.quad_terms {
            let pow = 2 + moment(term.axis) + angular(term.j) + angular(term.k);
            term.coeff *= half_rho * l.powi(pow);
        }
        for term in &mut self.surface_terms {
            let pow = 2 + moment(term.axis);
            term.coeff *= half_rho * l.powi(pow);
        }
        for i in 0..6 {
            for j in 0..6 {
                let pow = 3 + moment(i) + angular(j);
                self.added_mass[(i, j)] *= half_rho * l.powi(pow);
            }
        }
    }

    fn validate(&self, symmetry_tol: f64) -> Result<(), CoeffError> {
        let asym = (self.added_mass - self.added_mass.transpose()).norm();
        let scale = self.added_mass.norm().max(1.0);
        if asym > symmetry_tol * scale {
            return schema_err(
                "added_mass",
                format!(
                    "matrix asymmetry {asym:.3e} exceeds tolerance {symmetry_tol:.1e} * {scale:.3e}"
                ),
            );
        }

        // effective-mass positivity across the depth grid (A_added does
        // not depend on the velocity)
        let mut depths: Vec<f64> = vec![0.0];
        for t in &self.depth_tables {
            depths.extend_from_slice(&t.depth);
            depths.push(t.depth.last().unwrap() + 1.0);
        }
        depths.push(1.0e4);
        let m_rb = assemble_mass_matrix(&self.mass_properties);
        let (_, b_acc) = coupling_split(&self.mass_properties, &Vector6::zeros());
        for depth in depths {
            let m_eff = m_rb + b_acc - self.added_mass_at(depth);
            let sym = (m_eff + m_eff.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(sym);
            let min_eig = eig.eigenvalues.min();
            let floor = 1e-6 * self.mass_properties.mass();
            if min_eig < floor {
                return schema_err(
                    "added_mass",
                    format!(
                        "effective mass matrix at depth {depth} m has eigenvalue {min_eig:.3e} \
                         below {floor:.3e}; coefficient set inconsistent"
                    ),
                );
            }
        }
        Ok(())
    }

    pub fn mass_properties(&self) -> &MassProperties {
        &self.mass_properties
    }

    pub fn buoyancy(&self) -> &BuoyancyProperties {
        &self.buoyancy
    }

    /// Neutral trim at scenario start: the weight is set to exactly
    /// balance the given buoyancy and the horizontal CG is shifted onto
    /// the center of buoyancy (ballast and trim tanks), preserving the
    /// inertia tensor and the vertical CG offset.
    pub fn trim_neutral(&mut self, buoyancy: BuoyancyProperties) {
        let mp = &self.mass_properties;
        let new_mass = buoyancy.force / crate::GRAVITY;
        let scale = (mp.mass() / new_mass).sqrt();
        let cg = Vector3::new(buoyancy.cb.x, buoyancy.cb.y, mp.cg().z);
        self.mass_properties = MassProperties::new(
            new_mass,
            cg,
            mp.gyration_radii() * scale,
            mp.inertia_products(),
        )
        .expect("trim preserves validity");
        self.buoyancy = buoyancy;
    }

    pub fn propeller(&self) -> &PropellerModel {
        &self.propeller
    }

    fn depth_multiplier(&self, target: DepthTarget, depth: f64) -> f64 {
        self.depth_tables
            .iter()
            .filter(|t| t.target == target)
            .map(|t| t.eval(depth))
            .product()
    }

    /// Added-mass matrix with depth corrections applied.
    pub fn added_mass_at(&self, depth: f64) -> Matrix6 {
        let mut out = self.added_mass;
        for t in &self.depth_tables {
            if let DepthTarget::AddedMass { row, col } = t.target {
                out[(row, col)] *= t.eval(depth);
            }
        }
        out
    }

    /// Velocity/actuator-dependent hydrodynamic load and the added-mass
    /// matrix for the left-hand-side assembly.
    pub fn hydrodynamic_force(
        &self,
        s: &Vector6,
        act: &ActuatorState,
        depth: f64,
    ) -> (GeneralizedForce, Matrix6) {
        let mut f = Vector6::zeros();
        for (idx, term) in self.quad_terms.iter().enumerate() {
            let sj = if term.signed { s[term.j].abs() } else { s[term.j] };
            let mult = self.depth_multiplier(DepthTarget::Quad { index: idx }, depth);
            f[term.axis] += mult * term.coeff * sj * s[term.k];
        }
        let u = s[0];
        for (idx, term) in self.surface_terms.iter().enumerate() {
            let mult = self.depth_multiplier(DepthTarget::Surface { index: idx }, depth);
            f[term.axis] += mult * term.coeff * u * u * term.law.eval(act.deltas[term.surface - 1]);
        }
        let prop = self.propeller_force(act.n, u);
        (GeneralizedForce(f) + prop, self.added_mass_at(depth))
    }

    /// Contribution of a single control surface `l` in 1..=5 at surge
    /// speed `u`.
    pub fn control_surface_force(&self, u: f64, delta: f64, l: usize) -> GeneralizedForce {
        assert!((1..=5).contains(&l), "surface index {l} out of 1..=5");
        let mut f = Vector6::zeros();
        for term in self.surface_terms.iter().filter(|t| t.surface == l) {
            f[term.axis] += term.coeff * u * u * term.law.eval(delta);
        }
        GeneralizedForce(f)
    }

    /// Propeller thrust and shaft torque; other components zero. The
    /// advance ratio is clamped to the declared validity range.
    pub fn propeller_force(&self, n: f64, u: f64) -> GeneralizedForce {
        let mut f = Vector6::zeros();
        if n == 0.0 {
            return GeneralizedForce(f);
        }
        let prop = &self.propeller;
        let j_raw = u / (n * prop.diameter);
        let j = j_raw.clamp(prop.j_range[0], prop.j_range[1]);
        if j != j_raw {
            log::debug!(
                "advance ratio {j_raw:.3} outside validity range {:?}, clamped",
                prop.j_range
            );
        }
        let n2 = n * n;
        let d4 = prop.diameter.powi(4);
        f[0] = WATER_DENSITY * n2 * d4 * poly_eval(&prop.kt, j);
        f[3] = WATER_DENSITY * n2 * d4 * prop.diameter * poly_eval(&prop.kq, j);
        GeneralizedForce(f)
    }

    #[cfg(test)]
    fn quad_terms(&self) -> &[QuadTerm] {
        &self.quad_terms
    }
}

// accessors used by neutral trim
impl MassProperties {
    pub fn gyration_radii(&self) -> Vector3 {
        let inertia = self.inertia();
        Vector3::new(
            (inertia[(0, 0)] / self.mass()).sqrt(),
            (inertia[(1, 1)] / self.mass()).sqrt(),
            (inertia[(2, 2)] / self.mass()).sqrt(),
        )
    }

    pub fn inertia_products(&self) -> Vector3 {
        let inertia = self.inertia();
        Vector3::new(-inertia[(0, 1)], -inertia[(0, 2)], -inertia[(1, 2)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn minimal_json(extra: &str) -> String {
        format!(
            r#"{{
  "schema_version": 1,
  "name": "test-set",
  "units": {{"convention": "dimensional_si"}},
  "origin": "body origin at midships; x fwd, y stbd, z down",
  "mass": {{"mass_kg": 1.0e6, "cg": [0.0, 0.0, 0.1], "gyration": [3.0, 15.0, 15.0]}},
  "buoyancy": {{"force_n": 9.81e6, "cb": [0.0, 0.0, -0.1]}},
  "added_mass": [
    [-1e4, 0, 0, 0, 0, 0],
    [0, -9e5, 0, 0, 0, 0],
    [0, 0, -9e5, 0, 0, 0],
    [0, 0, 0, -1e5, 0, 0],
    [0, 0, 0, 0, -2e8, 0],
    [0, 0, 0, 0, 0, -2e8]
  ],
  "propeller": {{"diameter": 4.0, "kt": [0.4, -0.3], "kq": [0.05, -0.03], "j_range": [0.0, 1.2], "n_max": 3.0}}
  {extra}
}}"#
        )
    }

    fn set_with(extra: &str) -> CoefficientSet {
        CoefficientSet::from_json_str(&minimal_json(extra)).unwrap()
    }

    #[test]
    fn zero_state_zero_force() {
        let cs = set_with(
            r#", "quad_terms": [
                {"axis": 0, "j": 0, "k": 0, "coeff": -4000.0, "signed": true},
                {"axis": 1, "j": 0, "k": 5, "coeff": 2.0e6}
            ],
            "surface_terms": [{"axis": 2, "surface": 5, "coeff": -7000.0}]"#,
        );
        let (f, _) = cs.hydrodynamic_force(&Vector6::zeros(), &ActuatorState::still(), 100.0);
        assert_eq!(f.0, Vector6::zeros());
    }

    #[test]
    fn single_quad_term() {
        let cs = set_with(r#", "quad_terms": [{"axis": 1, "j": 0, "k": 5, "coeff": 3.5}]"#);
        let mut s = Vector6::zeros();
        s[0] = 2.0;
        s[5] = 0.3;
        let (f, _) = cs.hydrodynamic_force(&s, &ActuatorState::still(), 100.0);
        assert_relative_eq!(f.0[1], 3.5 * 2.0 * 0.3, max_relative = 1e-15);
    }

    /// Independent dense accumulation oracle for the velocity-product
    /// group.
    #[test]
    fn random_terms_match_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut quad = String::new();
        let mut coeffs = vec![];
        for i in 0..50 {
            let axis = rng.random_range(0..6usize);
            let j = rng.random_range(0..6usize);
            let k = rng.random_range(0..6usize);
            let c: f64 = rng.random_range(-1e4..1e4);
            let signed = rng.random_bool(0.5);
            coeffs.push((axis, j, k, c, signed));
            if i > 0 {
                quad.push(',');
            }
            quad.push_str(&format!(
                r#"{{"axis": {axis}, "j": {j}, "k": {k}, "coeff": {c}, "signed": {signed}}}"#
            ));
        }
        let cs = set_with(&format!(r#", "quad_terms": [{quad}]"#));
        for _ in 0..50 {
            let s = Vector6::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let (f, _) = cs.hydrodynamic_force(&s, &ActuatorState::still(), 500.0);
            let mut expect = [0.0f64; 6];
            for &(axis, j, k, c, signed) in &coeffs {
                let sj = if signed { s[j].abs() } else { s[j] };
                expect[axis] += c * sj * s[k];
            }
            for i in 0..6 {
                assert_relative_eq!(f.0[i], expect[i], max_relative = 1e-12, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn quad_group_scales_quadratically() {
        let cs = set_with(
            r#", "quad_terms": [
                {"axis": 0, "j": 0, "k": 0, "coeff": -4000.0, "signed": true},
                {"axis": 4, "j": 0, "k": 2, "coeff": -1.0e5},
                {"axis": 5, "j": 5, "k": 5, "coeff": -2.0e6, "signed": true}
            ]"#,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let s = Vector6::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let (f1, _) = cs.hydrodynamic_force(&s, &ActuatorState::still(), 300.0);
        let alpha = 1.7;
        let (f2, _) = cs.hydrodynamic_force(&(s * alpha), &ActuatorState::still(), 300.0);
        for i in 0..6 {
            assert_relative_eq!(
                f2.0[i],
                alpha * alpha * f1.0[i],
                max_relative = 1e-12,
                epsilon = 1e-9
            );
        }
        // negative scaling separates the groups: signed terms follow
        // a|a|, plain products follow a^2
        let alpha = -1.3f64;
        let (f3, _) = cs.hydrodynamic_force(&(s * alpha), &ActuatorState::still(), 300.0);
        for (i, factor) in [
            (0, alpha * alpha.abs()),
            (4, alpha * alpha),
            (5, alpha * alpha.abs()),
        ] {
            assert_relative_eq!(f3.0[i], factor * f1.0[i], max_relative = 1e-12, epsilon = 1e-9);
        }
    }

    #[test]
    fn added_mass_independent_of_velocity_and_actuators() {
        let cs = set_with("");
        let (_, a1) = cs.hydrodynamic_force(&Vector6::repeat(1.5), &ActuatorState::still(), 50.0);
        let act = ActuatorState::new([0.3, -0.2, 0.1, 0.0, 0.25], 2.0, 0.6, 3.0).unwrap();
        let (_, a2) = cs.hydrodynamic_force(&Vector6::repeat(-0.7), &act, 50.0);
        assert_eq!(a1, a2);
    }

    #[test]
    fn surface_force_modes() {
        let cs = set_with(
            r#", "surface_terms": [
                {"axis": 2, "surface": 1, "coeff": -1.0},
                {"axis": 1, "surface": 2, "coeff": 2.0, "law": "literal_squared"},
                {"axis": 3, "surface": 3, "coeff": 1.5, "law": "signed_quadratic"}
            ]"#,
        );
        for l in 1..=3 {
            assert_eq!(cs.control_surface_force(5.0, 0.0, l).0, Vector6::zeros());
            assert_eq!(cs.control_surface_force(0.0, 0.3, l).0, Vector6::zeros());
        }
        let f = cs.control_surface_force(5.0, 0.1, 1);
        assert_relative_eq!(f.0[2], -2.5, max_relative = 1e-15);
        let fneg = cs.control_surface_force(5.0, -0.1, 1);
        assert_relative_eq!(fneg.0[2], 2.5, max_relative = 1e-15);
        let f2 = cs.control_surface_force(2.0, -0.2, 2);
        assert_relative_eq!(f2.0[1], 2.0 * 4.0 * 0.04, max_relative = 1e-14);
        let f3 = cs.control_surface_force(2.0, -0.2, 3);
        assert_relative_eq!(f3.0[3], 1.5 * 4.0 * (-0.04), max_relative = 1e-14);
    }

    #[test]
    fn propeller_zero_rate_and_constant_kt() {
        let cs = set_with("");
        assert_eq!(cs.propeller_force(0.0, 3.0).0, Vector6::zeros());

        let cs2 = CoefficientSet::from_json_str(
            &minimal_json("").replace(r#""kt": [0.4, -0.3]"#, r#""kt": [0.4]"#),
        )
        .unwrap();
        let f = cs2.propeller_force(2.0, 0.0);
        assert_relative_eq!(f.0[0], 1025.0 * 4.0 * 256.0 * 0.4, max_relative = 1e-12);
    }

    #[test]
    fn depth_table_reverts_beyond_deepest_knot() {
        let cs = set_with(
            r#", "quad_terms": [{"axis": 2, "j": 0, "k": 2, "coeff": -1000.0}],
            "depth_tables": [
                {"target": {"group": "quad", "index": 0}, "depth": [0.0, 10.0, 30.0], "multiplier": [1.5, 1.2, 1.0]}
            ]"#,
        );
        let mut s = Vector6::zeros();
        s[0] = 2.0;
        s[2] = 1.0;
        let deep = cs.hydrodynamic_force(&s, &ActuatorState::still(), 31.0).0;
        let very_deep = cs.hydrodynamic_force(&s, &ActuatorState::still(), 500.0).0;
        assert_relative_eq!(deep.0[2], -2000.0, max_relative = 1e-12);
        assert_eq!(deep.0, very_deep.0);
        let mid = cs.hydrodynamic_force(&s, &ActuatorState::still(), 5.0).0;
        assert_relative_eq!(mid.0[2], -2000.0 * 1.35, max_relative = 1e-12);
        let shallow = cs.hydrodynamic_force(&s, &ActuatorState::still(), -1.0).0;
        assert_relative_eq!(shallow.0[2], -2000.0 * 1.5, max_relative = 1e-12);
    }

    #[test]
    fn depth_table_on_added_mass() {
        let cs = set_with(
            r#", "depth_tables": [
                {"target": {"group": "added_mass", "row": 2, "col": 2}, "depth": [0.0, 20.0], "multiplier": [1.4, 1.0]}
            ]"#,
        );
        let a_deep = cs.added_mass_at(100.0);
        let a_surf = cs.added_mass_at(0.0);
        assert_relative_eq!(a_surf[(2, 2)], 1.4 * a_deep[(2, 2)], max_relative = 1e-12);
        assert_relative_eq!(a_deep[(2, 2)], -9e5, max_relative = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_added_mass() {
        let bad = minimal_json("").replace("[0, -9e5, 0, 0, 0, 0]", "[5e4, -9e5, 0, 0, 0, 0]");
        let err = CoefficientSet::from_json_str(&bad).unwrap_err();
        assert!(matches!(err, CoeffError::Schema { .. }), "{err}");
    }

    #[test]
    fn rejects_effective_mass_with_tiny_eigenvalue() {
        let bad = minimal_json("").replace("[-1e4, 0, 0, 0, 0, 0]", "[1.1e6, 0, 0, 0, 0, 0]");
        let err = CoefficientSet::from_json_str(&bad).unwrap_err();
        match err {
            CoeffError::Schema { field, .. } => assert_eq!(field, "added_mass"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_bad_depth_table() {
        let non_monotone = minimal_json(
            r#", "depth_tables": [
                {"target": {"group": "added_mass", "row": 0, "col": 0}, "depth": [10.0, 5.0], "multiplier": [1.1, 1.0]}
            ]"#,
        );
        assert!(CoefficientSet::from_json_str(&non_monotone).is_err());
        let bad_tail = minimal_json(
            r#", "depth_tables": [
                {"target": {"group": "added_mass", "row": 0, "col": 0}, "depth": [0.0, 5.0], "multiplier": [1.1, 1.05]}
            ]"#,
        );
        assert!(CoefficientSet::from_json_str(&bad_tail).is_err());
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let bad = minimal_json(r#", "quad_terms": [{"axis": 6, "j": 0, "k": 0, "coeff": 1.0}]"#);
        assert!(CoefficientSet::from_json_str(&bad).is_err());
        let bad2 = minimal_json(r#", "surface_terms": [{"axis": 0, "surface": 6, "coeff": 1.0}]"#);
        assert!(CoefficientSet::from_json_str(&bad2).is_err());
    }

    #[test]
    fn json_error_reports_position() {
        let err = CoefficientSet::from_json_str("{\n  \"schema_version\": oops\n}").unwrap_err();
        match err {
            CoeffError::Json { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn prime_system_conversion() {
        let l = 70.2f64;
        let half_rho_l2 = 0.5 * WATER_DENSITY * l * l;
        let json = format!(
            r#"{{
  "schema_version": 1,
  "name": "prime-test",
  "units": {{"convention": "prime", "ref_length": {l}}},
  "origin": "test",
  "mass": {{"mass_kg": 1.0e6, "cg": [0.0, 0.0, 0.0], "gyration": [3.0, 15.0, 15.0]}},
  "buoyancy": {{"force_n": 9.81e6, "cb": [0.0, 0.0, 0.0]}},
  "added_mass": [
    [-1e-3, 0, 0, 0, 0, 0],
    [0, -1e-2, 0, 0, 0, 0],
    [0, 0, -1e-2, 0, 0, 0],
    [0, 0, 0, -1e-4, 0, 0],
    [0, 0, 0, 0, -1e-3, 0],
    [0, 0, 0, 0, 0, -1e-3]
  ],
  "quad_terms": [{{"axis": 1, "j": 0, "k": 1, "coeff": -0.01}}, {{"axis": 5, "j": 0, "k": 5, "coeff": -0.002}}],
  "propeller": {{"diameter": 4.0, "kt": [0.4], "kq": [0.05], "j_range": [0.0, 1.2], "n_max": 3.0}}
}}"#
        );
        let cs = CoefficientSet::from_json_str(&json).unwrap();
        let mut s = Vector6::zeros();
        s[0] = 2.0;
        s[1] = 0.5;
        let (f, a) = cs.hydrodynamic_force(&s, &ActuatorState::still(), 100.0);
        // Y_uv: force with two linear velocities -> (rho/2) L^2
        assert_relative_eq!(f.0[1], -0.01 * half_rho_l2 * 2.0 * 0.5, max_relative = 1e-12);
        // surge added mass: force with linear acceleration -> (rho/2) L^3
        assert_relative_eq!(
            a[(0, 0)],
            -1e-3 * 0.5 * WATER_DENSITY * l.powi(3),
            max_relative = 1e-12
        );
        // N_ur: moment with one angular index -> (rho/2) L^4
        let nur = cs.quad_terms().iter().find(|t| t.axis == 5).unwrap().coeff;
        assert_relative_eq!(
            nur,
            -0.002 * 0.5 * WATER_DENSITY * l.powi(4),
            max_relative = 1e-12
        );
    }

    #[test]
    fn actuator_state_limits() {
        assert!(ActuatorState::new([0.0; 5], 0.0, 0.5, 3.0).is_ok());
        assert!(ActuatorState::new([0.6, 0.0, 0.0, 0.0, 0.0], 0.0, 0.5, 3.0).is_err());
        assert!(ActuatorState::new([0.0; 5], 3.5, 0.5, 3.0).is_err());
    }

    #[test]
    fn trim_neutral_balances_and_preserves_inertia() {
        let mut cs = set_with("");
        let inertia_before = cs.mass_properties().inertia();
        let new_b =
            BuoyancyProperties::new(1.05 * cs.mass_properties().weight(), Vector3::zeros())
                .unwrap();
        cs.trim_neutral(new_b);
        assert_relative_eq!(
            cs.mass_properties().weight(),
            new_b.force,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            cs.mass_properties().inertia(),
            inertia_before,
            max_relative = 1e-12
        );
    }

    #[test]
    fn self_propulsion_steady_speed_matches_algebraic_balance() {
        use crate::rigid_body::{self, VehicleState};
        // drag -d u|u| against thrust rho n^2 D^4 a0:
        // steady u = n D^2 sqrt(rho a0 / d)
        let d_drag = 4000.0;
        let a0 = 0.4;
        // CG at the origin keeps the run in pure surge
        let cs = CoefficientSet::from_json_str(
            &minimal_json(&format!(
                r#", "quad_terms": [{{"axis": 0, "j": 0, "k": 0, "coeff": -{d_drag}, "signed": true}}]"#
            ))
            .replace(r#""kt": [0.4, -0.3]"#, &format!(r#""kt": [{a0}]"#))
            .replace(r#""cg": [0.0, 0.0, 0.1]"#, r#""cg": [0.0, 0.0, 0.0]"#),
        )
        .unwrap();
        let n = 1.5;
        let u_expect = n * (1025.0 * f64::powi(4.0, 4) * a0 / d_drag).sqrt();
        let mp = *cs.mass_properties();
        let m_rb = rigid_body::assemble_mass_matrix(&mp);
        let act = ActuatorState::new([0.0; 5], n, 0.6, 3.0).unwrap();
        let mut state = VehicleState::new(
            Vector3::new(0.0, 0.0, -100.0),
            Vector3::zeros(),
            Vector6::zeros(),
        );
        let accel = |_t: f64, st: &VehicleState| {
            let (b_vel, b_acc) = rigid_body::coupling_split(&mp, &st.velocity);
            let (f, a_added) = cs.hydrodynamic_force(&st.velocity, &act, st.depth());
            // surge-only balance; restoring is neutral here by design
            let mut rhs = f.0 - b_vel;
            for i in 1..6 {
                rhs[i] = 0.0;
            }
            rigid_body::solve_accelerations(&(m_rb + b_acc - a_added), &rhs)
        };
        let dt = 0.1;
        for k in 0..20000 {
            state = rigid_body::rk4_step(&state, k as f64 * dt, dt, accel).unwrap();
        }
        assert_relative_eq!(state.velocity[0], u_expect, max_relative = 1e-3);
    }
}
