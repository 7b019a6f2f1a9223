//! Sampled-data adaptive augmentation of the autopilot references.
//!
//! The controller runs on yaw and depth as two decoupled second-order
//! channels. Each sample instant it
//!
//! 1. forms the prediction error between an output predictor and the
//!    measured outputs,
//! 2. maps it through a piecewise-constant estimate of the lumped
//!    disturbance,
//! 3. filters the estimate through a strictly proper low-pass stage and
//!    subtracts it from the feedforward reference.
//!
//! Every discrete step is an exact zero-order-hold discretization built
//! from matrix exponentials; nothing is forward-Euler.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{expm_with_integral, lyapunov_solve, nullspace_rows, sqrtm_spd, LinalgError};

#[derive(Debug, Error)]
pub enum L1Error {
    #[error("reference model is invalid: {0}")]
    InvalidModel(String),
    #[error("adaptation transform ill-conditioned (cond {cond:.3e}); incompatible (C, Q) pair")]
    IllConditioned { cond: f64 },
    #[error("filter realization has unstable modes; invalid reference-model choice")]
    NonMinimumPhase,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Exact zero-order-hold discretization data for one state matrix:
/// `exp_a = e^{A Ts}` and `integral = int_0^{Ts} e^{A s} ds`, so that
/// `x+ = exp_a x + integral w` advances `x' = A x + w` exactly for
/// constant `w`.
#[derive(Debug, Clone)]
pub struct Zoh {
    pub exp_a: DMatrix<f64>,
    pub integral: DMatrix<f64>,
    pub t_s: f64,
}

impl Zoh {
    pub fn new(a: &DMatrix<f64>, t_s: f64) -> Self {
        let (exp_a, integral) = expm_with_integral(a, t_s);
        Self { exp_a, integral, t_s }
    }
}

/// Desired closed-loop dynamics (A_m, B_m, C_m) with the DC-matching gain
/// `K_g = -(C_m A_m^-1 B_m)^-1`.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub k_g: DMatrix<f64>,
    /// (omega_n, zeta) when built as the standard two-channel model;
    /// required by the analytic filter construction.
    channel: Option<(f64, f64)>,
}

impl ReferenceModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn channel_params(&self) -> Option<(f64, f64)> {
        self.channel
    }

    /// Generic constructor used by tests and alternative designs.
    pub fn from_triple(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self, L1Error> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(L1Error::InvalidModel(format!(
                "dimension mismatch: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        for ev in a.complex_eigenvalues().iter() {
            if ev.re >= 0.0 {
                return Err(L1Error::InvalidModel(format!(
                    "A_m is not Hurwitz (eigenvalue {ev})"
                )));
            }
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| L1Error::InvalidModel("A_m is singular".into()))?;
        let dc = &c * &a_inv * &b;
        let k_g = (-dc)
            .try_inverse()
            .ok_or_else(|| L1Error::InvalidModel("C A^-1 B is singular; no DC gain".into()))?;
        Ok(Self {
            a,
            b,
            c,
            k_g,
            channel: None,
        })
    }

    /// Pseudo-inverse initialization of the predictor state from the first
    /// measured outputs.
    pub fn init_state(&self, y0: &DVector<f64>) -> DVector<f64> {
        let c_pinv = self
            .c
            .clone()
            .pseudo_inverse(1e-12)
            .expect("C_m has full row rank");
        c_pinv * y0
    }
}

/// Two decoupled critically-dampable second-order channels
/// `M(s) = omega_n^2 / (s^2 + 2 zeta omega_n s + omega_n^2)` realized per
/// channel as
///
/// ```text
/// A = [0, 1; -omega_n^2, -2 zeta omega_n],  B = [0; omega_n^2],  C = [1, 0]
/// ```
///
/// State ordering: [ch1_pos, ch1_rate, ch2_pos, ch2_rate], outputs
/// (yaw, depth).
pub fn build_reference_model(omega_n: f64, zeta: f64) -> Result<ReferenceModel, L1Error> {
    if !(omega_n > 0.0) || !(zeta > 0.0) {
        return Err(L1Error::InvalidModel(format!(
            "omega_n and zeta must be positive, got {omega_n}, {zeta}"
        )));
    }
    let mut a = DMatrix::<f64>::zeros(4, 4);
    let mut b = DMatrix::<f64>::zeros(4, 2);
    let mut c = DMatrix::<f64>::zeros(2, 4);
    for ch in 0..2 {
        let i = 2 * ch;
        a[(i, i + 1)] = 1.0;
        a[(i + 1, i)] = -omega_n * omega_n;
        a[(i + 1, i + 1)] = -2.0 * zeta * omega_n;
        b[(i + 1, ch)] = omega_n * omega_n;
        c[(ch, i)] = 1.0;
    }
    let mut model = ReferenceModel::from_triple(a, b, c)?;
    model.channel = Some((omega_n, zeta));
    Ok(model)
}

/// Precomputed adaptation-law matrices: the state transform
/// `Lambda = [C_m; D sqrt(P)]`, the hold integral
/// `Phi(Ts) = int_0^{Ts} e^{Lambda A Lambda^-1 (Ts - tau)} Lambda dtau`,
/// and the composite update map
/// `sigma = -Phi^-1 e^{Lambda A Lambda^-1 Ts} embed (y_hat - y)`.
#[derive(Debug, Clone)]
pub struct AdaptationMatrices {
    pub t_s: f64,
    pub lambda: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub exp_transformed: DMatrix<f64>,
    pub embed: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub annihilator: DMatrix<f64>,
    /// Composite `-Phi^-1 e^{..} embed` applied to the prediction error.
    update_map: DMatrix<f64>,
    /// Operator bound on `Phi^-1 e^{..}` for the printed sigma inequality.
    pub gain_bound: f64,
}

const LAMBDA_MAX_COND: f64 = 1e12;

/// Builds the adaptation matrices for a given positive definite `Q` and
/// sampling period `Ts`.
pub fn build_adaptation(
    model: &ReferenceModel,
    q: &DMatrix<f64>,
    t_s: f64,
) -> Result<AdaptationMatrices, L1Error> {
    assert!(t_s > 0.0, "sampling period must be positive");
    let n = model.n_states();
    let n_y = model.n_outputs();
    if q.nrows() != n || q.ncols() != n {
        return Err(L1Error::InvalidModel(format!(
            "Q must be {n}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let q_eig = ((q + q.transpose()) * 0.5).symmetric_eigen();
    if q_eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(L1Error::InvalidModel("Q must be positive definite".into()));
    }

    let p = lyapunov_solve(&model.a, q)?;
    let sqrt_p = sqrtm_spd(&p)?;
    let sqrt_p_inv = sqrt_p
        .clone()
        .try_inverse()
        .ok_or(L1Error::IllConditioned { cond: f64::INFINITY })?;
    let annihilator = nullspace_rows(&(&model.c * &sqrt_p_inv));
    if annihilator.nrows() != n - n_y {
        return Err(L1Error::IllConditioned { cond: f64::INFINITY });
    }

    let mut lambda = DMatrix::<f64>::zeros(n, n);
    lambda.view_mut((0, 0), (n_y, n)).copy_from(&model.c);
    if n > n_y {
        lambda
            .view_mut((n_y, 0), (n - n_y, n))
            .copy_from(&(&annihilator * &sqrt_p));
    }
    let svd = lambda.clone().svd(false, false);
    let cond = svd.singular_values.max() / svd.singular_values.min().max(f64::MIN_POSITIVE);
    if !cond.is_finite() || cond > LAMBDA_MAX_COND {
        return Err(L1Error::IllConditioned { cond });
    }
    let lambda_inv = lambda
        .clone()
        .try_inverse()
        .ok_or(L1Error::IllConditioned { cond })?;

    let a_transformed = &lambda * &model.a * &lambda_inv;
    let (exp_transformed, hold_integral) = expm_with_integral(&a_transformed, t_s);
    let phi = &hold_integral * &lambda;
    let phi_inv = phi
        .clone()
        .try_inverse()
        .ok_or(L1Error::IllConditioned { cond: f64::INFINITY })?;

    let mut embed = DMatrix::<f64>::zeros(n, n_y);
    embed.view_mut((0, 0), (n_y, n_y)).copy_from(&DMatrix::identity(n_y, n_y));

    let gain_matrix = &phi_inv * &exp_transformed;
    let update_map = -(&gain_matrix * &embed);
    let gain_bound = gain_matrix.svd(false, false).singular_values.max();

    Ok(AdaptationMatrices {
        t_s,
        lambda,
        phi,
        exp_transformed,
        embed,
        p,
        annihilator,
        update_map,
        gain_bound,
    })
}

/// Piecewise-constant disturbance estimate from the current prediction
/// error:
/// `sigma[i] = -Phi^-1(Ts) e^{Lambda A Lambda^-1 Ts} embed (y_hat - y)`.
pub fn adaptation_step(
    am: &AdaptationMatrices,
    y_hat: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    let err = y_hat - y;
    let sigma = &am.update_map * &err;
    debug_assert!(
        sigma.norm() <= am.gain_bound * err.norm() * (1.0 + 1e-9),
        "sigma bound violated"
    );
    sigma
}

/// One exact ZOH update of the output predictor
/// `x+ = e^{A Ts} x + A^-1 (e^{A Ts} - I)(B u + sigma)`, returning the
/// next state and its output.
pub fn predictor_step(
    model: &ReferenceModel,
    disc: &Zoh,
    x_hat: &DVector<f64>,
    u_d: &DVector<f64>,
    sigma: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let x_next = &disc.exp_a * x_hat + &disc.integral * (&model.b * u_d + sigma);
    let y_next = &model.c * &x_next;
    (x_next, y_next)
}

/// Minimal realization of the control-law filter
/// `O(s) = C(s) M^-1(s) C_m (s I - A_m)^-1` for the two-channel model,
/// with `C(s) = omega_c^2 / (s + omega_c)^2` per channel. The reference
/// poles cancel analytically, leaving per channel
///
/// ```text
/// O_ch(s) = [ omega_c^2 (s + 2 zeta omega_n),  omega_c^2 ] / (omega_n^2 (s + omega_c)^2)
/// ```
///
/// realized in observable canonical form (2 states per channel).
#[derive(Debug, Clone)]
pub struct FilterRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub omega_c: f64,
}

pub fn build_filter(model: &ReferenceModel, omega_c: f64) -> Result<FilterRealization, L1Error> {
    assert!(omega_c > 0.0, "cutoff frequency must be positive");
    let (omega_n, zeta) = model.channel.ok_or_else(|| {
        L1Error::InvalidModel("analytic filter construction needs the two-channel model".into())
    })?;
    let wc2 = omega_c * omega_c;
    let wn2 = omega_n * omega_n;
    let mut a = DMatrix::<f64>::zeros(4, 4);
    let mut b = DMatrix::<f64>::zeros(4, 4);
    let mut c = DMatrix::<f64>::zeros(2, 4);
    for ch in 0..2 {
        let i = 2 * ch;
        a[(i, i)] = -2.0 * omega_c;
        a[(i, i + 1)] = 1.0;
        a[(i + 1, i)] = -wc2;
        // numerators: N1 = (wc2/wn2) s + 2 zeta wc2 / omega_n, N2 = wc2/wn2
        b[(i, i)] = wc2 / wn2;
        b[(i + 1, i)] = 2.0 * zeta * wc2 / omega_n;
        b[(i + 1, i + 1)] = wc2 / wn2;
        c[(ch, i)] = 1.0;
    }
    for ev in a.complex_eigenvalues().iter() {
        if ev.re >= 0.0 {
            return Err(L1Error::NonMinimumPhase);
        }
    }
    // DC consistency: with C(0) = I and M(0) = I the filter DC must equal
    // C_m (-A_m)^-1
    let a_inv = a.clone().try_inverse().ok_or(L1Error::NonMinimumPhase)?;
    let dc_realized = -(&c * &a_inv * &b);
    let model_a_inv = model
        .a
        .clone()
        .try_inverse()
        .expect("A_m invertible (Hurwitz)");
    let dc_expected = -(&model.c * &model_a_inv);
    if (&dc_realized - &dc_expected).norm() > 1e-9 * dc_expected.norm().max(1.0) {
        return Err(L1Error::InvalidModel(format!(
            "filter DC gain mismatch: {:.3e}",
            (&dc_realized - &dc_expected).norm()
        )));
    }
    Ok(FilterRealization {
        a,
        b,
        c,
        omega_c,
    })
}

/// One exact ZOH update of the control law: advances the filter state
/// with the back-propagated estimate and emits
/// `u_d = K_g u_ref - C_o x_u`.
pub fn control_step(
    filter: &FilterRealization,
    disc: &Zoh,
    exp_minus_am: &DMatrix<f64>,
    k_g: &DMatrix<f64>,
    x_u: &DVector<f64>,
    u_ref: &DVector<f64>,
    sigma: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let u_d = k_g * u_ref - &filter.c * x_u;
    let x_next = &disc.exp_a * x_u + &disc.integral * (&filter.b * (exp_minus_am * sigma));
    (u_d, x_next)
}

/// Discrete-time controller state: predictor state, filter state, latest
/// estimate and the held output.
#[derive(Debug, Clone)]
pub struct L1State {
    pub x_hat: DVector<f64>,
    pub x_u: DVector<f64>,
    pub sigma: DVector<f64>,
    pub u_d: DVector<f64>,
}

/// Configuration of the augmentation loop.
#[derive(Debug, Clone, Copy)]
pub struct L1Config {
    pub omega_n: f64,
    pub zeta: f64,
    /// Filter cutoff [rad/s]; the usual choice is 1.5 * omega_n.
    pub omega_c: f64,
    pub t_s: f64,
}

impl L1Config {
    pub fn standard(omega_n: f64, zeta: f64, omega_c_factor: f64, t_s: f64) -> Self {
        Self {
            omega_n,
            zeta,
            omega_c: omega_c_factor * omega_n,
            t_s,
        }
    }
}

/// Fully assembled sampled-data controller for the (yaw, depth) pair.
#[derive(Debug, Clone)]
pub struct L1Controller {
    pub model: ReferenceModel,
    pub adaptation: AdaptationMatrices,
    pub filter: FilterRealization,
    disc_model: Zoh,
    disc_filter: Zoh,
    exp_minus_am: DMatrix<f64>,
    pub state: L1State,
}

impl L1Controller {
    pub fn new(config: &L1Config, q: &DMatrix<f64>, y0: &DVector<f64>) -> Result<Self, L1Error> {
        let model = build_reference_model(config.omega_n, config.zeta)?;
        let adaptation = build_adaptation(&model, q, config.t_s)?;
        let filter = build_filter(&model, config.omega_c)?;
        let disc_model = Zoh::new(&model.a, config.t_s);
        let disc_filter = Zoh::new(&filter.a, config.t_s);
        let (exp_minus_am, _) = expm_with_integral(&(-&model.a), config.t_s);
        let x_hat = model.init_state(y0);
        let n_y = model.n_outputs();
        let state = L1State {
            x_hat,
            x_u: DVector::zeros(filter.a.nrows()),
            sigma: DVector::zeros(model.n_states()),
            u_d: DVector::zeros(n_y),
        };
        Ok(Self {
            model,
            adaptation,
            filter,
            disc_model,
            disc_filter,
            exp_minus_am,
            state,
        })
    }

    pub fn t_s(&self) -> f64 {
        self.adaptation.t_s
    }

    /// One sample instant: measure, adapt, emit the held references and
    /// advance both discrete states.
    pub fn sample(&mut self, y: &DVector<f64>, u_ref: &DVector<f64>) -> DVector<f64> {
        let y_hat = &self.model.c * &self.state.x_hat;
        let sigma = adaptation_step(&self.adaptation, &y_hat, y);
        let (u_d, x_u_next) = control_step(
            &self.filter,
            &self.disc_filter,
            &self.exp_minus_am,
            &self.model.k_g,
            &self.state.x_u,
            u_ref,
            &sigma,
        );
        let (x_hat_next, _) =
            predictor_step(&self.model, &self.disc_model, &self.state.x_hat, &u_d, &sigma);
        self.state.x_hat = x_hat_next;
        self.state.x_u = x_u_next;
        self.state.sigma = sigma;
        self.state.u_d = u_d.clone();
        u_d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn scalar_model() -> ReferenceModel {
        ReferenceModel::from_triple(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap()
    }

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn reference_model_unit_dc_gain() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        assert_relative_eq!(m.k_g, DMatrix::identity(2, 2), epsilon = 1e-12);
        // critically damped double pole at -omega_n per channel
        let eigs = m.a.complex_eigenvalues();
        for ev in eigs.iter() {
            assert_relative_eq!(ev.re, -0.08, max_relative = 1e-9);
            assert_abs_diff_eq!(ev.im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn reference_model_rejects_unstable() {
        assert!(build_reference_model(-0.1, 1.0).is_err());
        let unstable = ReferenceModel::from_triple(
            DMatrix::from_row_slice(1, 1, &[0.5]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        );
        assert!(unstable.is_err());
    }

    /// Root-finding oracle for the critically damped step response
    /// 1 - (1 + w t) e^{-w t} = level.
    fn step_response_time(omega_n: f64, level: f64) -> f64 {
        let f = |x: f64| 1.0 - (1.0 + x) * (-x).exp() - level;
        let (mut lo, mut hi) = (0.0f64, 50.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi) / omega_n
    }

    #[test]
    fn reference_model_step_response_settles_without_overshoot() {
        let omega_n = 0.08;
        let m = build_reference_model(omega_n, 1.0).unwrap();
        let t_expect = step_response_time(omega_n, 0.95);
        assert_relative_eq!(t_expect, 59.3, max_relative = 2e-3);

        // simulate the step via exact ZOH at a fine step
        let dt = 0.01;
        let disc = Zoh::new(&m.a, dt);
        let u = dvec(&[1.0, 0.0]);
        let mut x = DVector::<f64>::zeros(4);
        let mut crossed = None;
        let mut max_y: f64 = 0.0;
        for k in 0..20000 {
            x = &disc.exp_a * &x + &disc.integral * (&m.b * &u);
            let y = (&m.c * &x)[0];
            max_y = max_y.max(y);
            if crossed.is_none() && y >= 0.95 {
                crossed = Some((k + 1) as f64 * dt);
            }
        }
        assert!(max_y <= 1.0 + 1e-9, "overshoot detected: {max_y}");
        let t95 = crossed.expect("step response never reached 95%");
        assert_relative_eq!(t95, t_expect, max_relative = 1e-2);
    }

    #[test]
    fn adaptation_scalar_closed_forms() {
        let m = scalar_model();
        let t_s = 0.25;
        let q = DMatrix::from_row_slice(1, 1, &[2.0]);
        let am = build_adaptation(&m, &q, t_s).unwrap();
        // A = -1, Q = 2 -> P = 1, D empty, Lambda = C = 1
        assert_relative_eq!(am.p[(0, 0)], 1.0, max_relative = 1e-12);
        assert_eq!(am.annihilator.nrows(), 0);
        assert_relative_eq!(am.lambda[(0, 0)], 1.0, max_relative = 1e-12);
        // Phi = 1 - e^{-Ts}
        assert_relative_eq!(am.phi[(0, 0)], 1.0 - (-t_s).exp(), max_relative = 1e-12);
        // sigma = -e e^{-Ts} / (1 - e^{-Ts})
        let e = 0.37;
        let sigma = adaptation_step(&am, &dvec(&[e]), &dvec(&[0.0]));
        let expect = -e * (-t_s).exp() / (1.0 - (-t_s).exp());
        assert_relative_eq!(sigma[0], expect, max_relative = 1e-12);
    }

    #[test]
    fn adaptation_zero_error_zero_estimate() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let am = build_adaptation(&m, &DMatrix::identity(4, 4), 0.1).unwrap();
        let y = dvec(&[0.3, -15.0]);
        let sigma = adaptation_step(&am, &y, &y);
        assert_abs_diff_eq!(sigma.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptation_lyapunov_residual_small() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let q = DMatrix::identity(4, 4);
        let am = build_adaptation(&m, &q, 0.1).unwrap();
        let residual = m.a.transpose() * &am.p + &am.p * &m.a + &q;
        assert!(residual.norm() < 1e-9, "residual {}", residual.norm());
        // annihilator property: D (C sqrtP^-1)^T = 0
        let sqrt_p = crate::linalg::sqrtm_spd(&am.p).unwrap();
        let x = &m.c * sqrt_p.try_inverse().unwrap();
        assert!((&am.annihilator * x.transpose()).norm() < 1e-9);
    }

    #[test]
    fn adaptation_phi_over_ts_tends_to_lambda() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let t_s = 1e-6;
        let am = build_adaptation(&m, &DMatrix::identity(4, 4), t_s).unwrap();
        let approx_lambda = &am.phi / t_s;
        let rel = (&approx_lambda - &am.lambda).norm() / am.lambda.norm();
        assert!(rel < 1e-4, "relative deviation {rel}");
    }

    /// Steady estimation error of the sampled loop against a known
    /// constant disturbance. The injected vector must lie in the range of
    /// the update map (a component outside it has no output signature at
    /// the sample instants).
    fn sigma_estimation_error(q: &DMatrix<f64>, t_s: f64) -> f64 {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let am = build_adaptation(&m, q, t_s).unwrap();
        let disc = Zoh::new(&m.a, t_s);
        let probe = adaptation_step(&am, &dvec(&[0.12, -0.4]), &dvec(&[0.0, 0.0]));
        let sigma_true = probe * 0.01;
        let u = dvec(&[0.0, 0.0]);

        let mut x_p = DVector::<f64>::zeros(4);
        let mut x_hat = DVector::<f64>::zeros(4);
        let mut sigma = DVector::<f64>::zeros(4);
        let steps = (400.0 / t_s) as usize;
        for _ in 0..steps {
            let y = &m.c * &x_p;
            let y_hat = &m.c * &x_hat;
            sigma = adaptation_step(&am, &y_hat, &y);
            x_p = &disc.exp_a * &x_p + &disc.integral * (&m.b * &u + &sigma_true);
            let (next, _) = predictor_step(&m, &disc, &x_hat, &u, &sigma);
            x_hat = next;
        }
        (&sigma - &sigma_true).norm() / sigma_true.norm()
    }

    #[test]
    fn adaptation_converges_to_constant_matched_disturbance() {
        // balanced Q (rate states weighted by 1/omega_n^2) keeps the
        // state transform well conditioned
        let omega_n: f64 = 0.08;
        let w = 1.0 / omega_n.powi(2);
        let q = DMatrix::from_diagonal(&dvec(&[1.0, w, 1.0, w]));
        let rel = sigma_estimation_error(&q, 0.1);
        assert!(rel < 0.05, "sigma error {rel}");
    }

    #[test]
    fn adaptation_error_shrinks_linearly_with_sample_period() {
        let q = DMatrix::identity(4, 4);
        let coarse = sigma_estimation_error(&q, 0.1);
        let fine = sigma_estimation_error(&q, 0.05);
        assert!(
            fine < 0.65 * coarse,
            "expected O(Ts) error: {coarse} -> {fine}"
        );
    }

    #[test]
    fn predictor_zero_input_stays_zero() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let disc = Zoh::new(&m.a, 0.1);
        let zero = DVector::<f64>::zeros(4);
        let (x, y) = predictor_step(&m, &disc, &zero, &dvec(&[0.0, 0.0]), &zero);
        assert_abs_diff_eq!(x.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn predictor_reaches_continuous_steady_state() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let disc = Zoh::new(&m.a, 0.1);
        let u = dvec(&[1.0, -2.0]);
        let zero = DVector::<f64>::zeros(4);
        let mut x = DVector::<f64>::zeros(4);
        for _ in 0..100000 {
            let (next, _) = predictor_step(&m, &disc, &x, &u, &zero);
            x = next;
        }
        let steady = -(m.a.clone().try_inverse().unwrap() * &m.b * &u);
        assert_relative_eq!(x, steady, max_relative = 1e-6, epsilon = 1e-9);
    }

    #[test]
    fn predictor_matches_fine_rk4_over_one_sample() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let t_s = 0.1;
        let disc = Zoh::new(&m.a, t_s);
        let x0 = dvec(&[0.5, -0.1, 2.0, 0.3]);
        let u = dvec(&[0.7, -1.1]);
        let sigma = dvec(&[0.02, -0.05, 0.1, 0.0]);
        let (x1, _) = predictor_step(&m, &disc, &x0, &u, &sigma);

        // fine-step RK4 oracle for x' = A x + B u + sigma
        let w = &m.b * &u + &sigma;
        let deriv = |x: &DVector<f64>| &m.a * x + &w;
        let n_sub = 1000;
        let h = t_s / n_sub as f64;
        let mut x = x0.clone();
        for _ in 0..n_sub {
            let k1 = deriv(&x);
            let k2 = deriv(&(&x + &k1 * (h / 2.0)));
            let k3 = deriv(&(&x + &k2 * (h / 2.0)));
            let k4 = deriv(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        assert!((x1 - &x).norm() <= 1e-9 * x.norm().max(1.0));
    }

    #[test]
    fn zoh_exactness_independent_of_sample_rate_for_constant_input() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let u = dvec(&[1.0, 1.0]);
        let zero = DVector::<f64>::zeros(4);
        let horizon = 2.0;
        let run = |t_s: f64| {
            let disc = Zoh::new(&m.a, t_s);
            let mut x = dvec(&[0.1, 0.0, -0.2, 0.05]);
            let steps = (horizon / t_s).round() as usize;
            for _ in 0..steps {
                let (next, _) = predictor_step(&m, &disc, &x, &u, &zero);
                x = next;
            }
            x
        };
        let coarse = run(0.1);
        let fine = run(0.05);
        assert!((&coarse - &fine).norm() < 1e-9 * coarse.norm().max(1.0));
    }

    #[test]
    fn filter_construction_and_frequency_response() {
        use nalgebra::Complex;
        let omega_n = 0.08;
        let zeta = 1.0;
        let omega_c = 1.5 * omega_n;
        assert_relative_eq!(omega_c, 0.12, max_relative = 1e-12);
        let m = build_reference_model(omega_n, zeta).unwrap();
        let filt = build_filter(&m, omega_c).unwrap();

        let to_complex = |mat: &DMatrix<f64>| mat.map(|v| Complex::new(v, 0.0));
        let (ac, bc, cc) = (to_complex(&filt.a), to_complex(&filt.b), to_complex(&filt.c));
        let amc = to_complex(&m.a);
        let cmc = to_complex(&m.c);

        for i in 0..50 {
            let w = 10f64.powf(-3.0 + 5.0 * i as f64 / 49.0);
            let s = Complex::new(0.0, w);
            // realized response
            let eye4 = DMatrix::<Complex<f64>>::identity(4, 4);
            let realized = &cc
                * (&eye4 * s - &ac)
                    .try_inverse()
                    .expect("resolvent invertible on the imaginary axis")
                * &bc;
            // symbolic product without the analytic cancellation
            let delta = s * s + s * 2.0 * zeta * omega_n + omega_n * omega_n;
            let c_of_s = omega_c * omega_c / ((s + omega_c) * (s + omega_c));
            let m_inv = delta / (omega_n * omega_n);
            let resolvent = (&eye4 * s - &amc).try_inverse().unwrap();
            let c_resolvent = &cmc * resolvent;
            let mut symbolic = DMatrix::<Complex<f64>>::zeros(2, 4);
            for ch in 0..2 {
                for col in 0..4 {
                    symbolic[(ch, col)] = c_of_s * m_inv * c_resolvent[(ch, col)];
                }
            }
            let err = (&realized - &symbolic).norm();
            let scale = symbolic.norm();
            assert!(
                err <= 1e-6 * scale,
                "frequency response mismatch at w={w}: {err} vs scale {scale}"
            );
        }
    }

    #[test]
    fn control_step_feedforward_when_no_estimate() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let filt = build_filter(&m, 0.12).unwrap();
        let disc = Zoh::new(&filt.a, 0.1);
        let (exp_minus_am, _) = expm_with_integral(&(-&m.a), 0.1);
        let x_u = DVector::<f64>::zeros(4);
        let u_ref = dvec(&[0.4, -15.0]);
        let sigma = DVector::<f64>::zeros(4);
        let (u_d, x_next) =
            control_step(&filt, &disc, &exp_minus_am, &m.k_g, &x_u, &u_ref, &sigma);
        assert_relative_eq!(u_d, &m.k_g * &u_ref, epsilon = 1e-12);
        assert_abs_diff_eq!(x_next.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn control_step_dc_offset_matches_transfer_function() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let t_s = 0.1;
        let filt = build_filter(&m, 0.12).unwrap();
        let disc = Zoh::new(&filt.a, t_s);
        let (exp_minus_am, _) = expm_with_integral(&(-&m.a), t_s);
        let sigma = dvec(&[0.01, 0.03, -0.02, 0.005]);
        let u_ref = dvec(&[0.0, 0.0]);
        let mut x_u = DVector::<f64>::zeros(4);
        let mut u_d = DVector::<f64>::zeros(2);
        for _ in 0..200000 {
            let (u, x_next) =
                control_step(&filt, &disc, &exp_minus_am, &m.k_g, &x_u, &u_ref, &sigma);
            u_d = u;
            x_u = x_next;
        }
        // steady offset = -O(0) e^{-A Ts} sigma with O(0) = -C_o A_o^-1 B_o
        let o_dc = -(&filt.c * filt.a.clone().try_inverse().unwrap() * &filt.b);
        let expect = -(&o_dc * (&exp_minus_am * &sigma));
        assert_relative_eq!(u_d, expect, max_relative = 1e-9);
    }

    /// Transparency: with the plant identical to M(s) and no
    /// uncertainty, the augmented loop reproduces the desired response.
    #[test]
    fn transparency_with_ideal_plant() {
        let config = L1Config::standard(0.08, 1.0, 1.5, 0.1);
        let q = DMatrix::identity(4, 4);
        let y0 = dvec(&[0.0, 0.0]);
        let mut ctrl = L1Controller::new(&config, &q, &y0).unwrap();
        let m = build_reference_model(config.omega_n, config.zeta).unwrap();
        let disc = Zoh::new(&m.a, config.t_s);
        let u_ref = dvec(&[0.5, -15.0]);

        let mut x_p = DVector::<f64>::zeros(4); // true plant
        let mut x_m = DVector::<f64>::zeros(4); // desired system
        let mut max_dev: f64 = 0.0;
        for _ in 0..5000 {
            let y = &m.c * &x_p;
            let u_d = ctrl.sample(&y, &u_ref);
            x_p = &disc.exp_a * &x_p + &disc.integral * (&m.b * &u_d);
            x_m = &disc.exp_a * &x_m + &disc.integral * (&m.b * (&m.k_g * &u_ref));
            let dev = (&m.c * &x_p - &m.c * &x_m).norm();
            max_dev = max_dev.max(dev);
        }
        assert!(max_dev < 1e-3, "transparency violated: {max_dev}");
    }

    /// Constant matched disturbance: augmented steady-state output error
    /// is far smaller than the unaugmented loop's.
    #[test]
    fn disturbance_rejection_beats_feedforward_only() {
        let config = L1Config::standard(0.08, 1.0, 1.5, 0.1);
        let q = DMatrix::identity(4, 4);
        let mut ctrl = L1Controller::new(&config, &q, &dvec(&[0.0, 0.0])).unwrap();
        let m = build_reference_model(config.omega_n, config.zeta).unwrap();
        let disc = Zoh::new(&m.a, config.t_s);
        let u_ref = dvec(&[0.0, -15.0]);
        let f0 = dvec(&[0.0, 2.0]); // constant depth-channel disturbance

        let run = |augmented: bool, ctrl: &mut L1Controller| -> f64 {
            let mut x_p = DVector::<f64>::zeros(4);
            let mut y_err = 0.0;
            for k in 0..6000 {
                let y = &m.c * &x_p;
                let u_d = if augmented {
                    ctrl.sample(&y, &u_ref)
                } else {
                    &m.k_g * &u_ref
                };
                x_p = &disc.exp_a * &x_p + &disc.integral * (&m.b * (&u_d + &f0));
                if k > 5500 {
                    y_err = (&m.c * &x_p - &u_ref).norm();
                }
            }
            y_err
        };
        let plain = run(false, &mut ctrl.clone());
        let augmented = run(true, &mut ctrl);
        assert!(
            augmented * 5.0 < plain,
            "rejection too weak: augmented {augmented} vs plain {plain}"
        );
        assert_relative_eq!(plain, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn sigma_bound_holds_during_noisy_run() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
        let config = L1Config::standard(0.08, 1.0, 1.5, 0.1);
        let q = DMatrix::identity(4, 4);
        let mut ctrl = L1Controller::new(&config, &q, &dvec(&[0.0, 0.0])).unwrap();
        for _ in 0..500 {
            let y = dvec(&[rng.random_range(-1.0..1.0), rng.random_range(-20.0..0.0)]);
            let u_ref = dvec(&[rng.random_range(-1.0..1.0), -15.0]);
            let y_hat = &ctrl.model.c * &ctrl.state.x_hat;
            let err_norm = (&y_hat - &y).norm();
            let u = ctrl.sample(&y, &u_ref);
            assert!(u.iter().all(|v| v.is_finite()));
            assert!(
                ctrl.state.sigma.norm() <= ctrl.adaptation.gain_bound * err_norm * (1.0 + 1e-9),
                "printed sigma inequality violated"
            );
        }
    }

    #[test]
    fn init_state_uses_pseudo_inverse() {
        let m = build_reference_model(0.08, 1.0).unwrap();
        let x0 = m.init_state(&dvec(&[0.3, -15.0]));
        assert_relative_eq!(x0[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(x0[2], -15.0, max_relative = 1e-12);
        assert_abs_diff_eq!(x0[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x0[3], 0.0, epsilon = 1e-12);
    }
}
