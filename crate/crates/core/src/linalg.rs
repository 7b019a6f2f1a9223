//! Small dense-matrix helpers for discrete-time controller synthesis.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
}

/// Solves the continuous Lyapunov equation `A^T P + P A = -Q` by
/// vectorization (Kronecker form); intended for small controller matrices.
pub fn lyapunov_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P)
    let coeff = eye.kronecker(&a.transpose()) + a.transpose().kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-q).as_slice());
    let sol = coeff
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LinalgError::SolveFailed("Lyapunov system singular".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    // symmetrize to remove rounding skew
    Ok((&p + p.transpose()) * 0.5)
}

/// Principal (symmetric) square root of an SPD matrix via the spectral
/// decomposition.
pub fn sqrtm_spd(p: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(LinalgError::NotSquare {
            rows: p.nrows(),
            cols: p.ncols(),
        });
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(LinalgError::NotSpd(format!(
            "eigenvalues {:?}",
            eig.eigenvalues.as_slice()
        )));
    }
    let sqrt_vals = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * sqrt_vals * eig.eigenvectors.transpose())
}

/// Orthonormal rows spanning the null space of `x` (i.e. `out * x^T = 0`),
/// obtained from the spectral decomposition of `x^T x`.
pub fn nullspace_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let gram = x.transpose() * x;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l));
    let tol = (scale.max(1.0)) * 1e-12;
    let mut rows: Vec<(f64, nalgebra::DVector<f64>)> = Vec::new();
    for k in 0..n {
        if eig.eigenvalues[k] <= tol {
            rows.push((eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()));
        }
    }
    // fixed ordering keeps the annihilator deterministic
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = DMatrix::<f64>::zeros(rows.len(), n);
    for (i, (_, v)) in rows.iter().enumerate() {
        // sign convention: first nonzero component positive
        let sign = v
            .iter()
            .find(|c| c.abs() > 1e-12)
            .map(|c| c.signum())
            .unwrap_or(1.0);
        for j in 0..n {
            out[(i, j)] = sign * v[j];
        }
    }
    out
}

/// Exact matrix exponential and its order-hold integral:
/// returns `(e^{A t}, int_0^t e^{A s} ds)` via one augmented exponential,
/// valid for singular `A` as well.
pub fn expm_with_integral(a: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "expm requires a square matrix");
    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let e = (aug * t).exp();
    let exp_at = e.view((0, 0), (n, n)).into_owned();
    let integral = e.view((0, n), (n, n)).into_owned();
    (exp_at, integral)
}
