//! Dense symmetric linear algebra helpers: Cholesky with diagonal jitter
//! escalation, log-determinants, and power-iteration eigenvalue bounds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{KbmfError, Result};

/// Initial jitter as a fraction of the mean diagonal; escalates ×10 per retry.
const JITTER_START: f64 = 1e-10;
/// Largest jitter fraction tried before giving up.
const JITTER_MAX: f64 = 1e-4;

/// Cholesky factorization of a symmetric positive definite matrix, retrying
/// with escalating diagonal jitter (1e-10·mean(diag) up to 1e-4·mean(diag)).
pub fn spd_cholesky(matrix: DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(KbmfError::Shape(format!("{context}: empty matrix")));
    }
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(chol);
    }
    let mean_diag = matrix.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let base = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut fraction = JITTER_START;
    while fraction <= JITTER_MAX {
        let mut jittered = matrix.clone();
        for i in 0..n {
            jittered[(i, i)] += fraction * base;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            log::warn!("{context}: factorization needed jitter {:.1e}·mean(diag)", fraction);
            return Ok(chol);
        }
        fraction *= 10.0;
    }
    Err(KbmfError::Numerical(format!(
        "{context}: Cholesky failed even with jitter up to {JITTER_MAX:.0e}·mean(diag)"
    )))
}

/// Inverse of an SPD matrix through [`spd_cholesky`].
pub fn spd_inverse(matrix: DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    Ok(spd_cholesky(matrix, context)?.inverse())
}

/// ln det of an SPD matrix through its Cholesky factor.
pub fn spd_log_det(matrix: &DMatrix<f64>, context: &str) -> Result<f64> {
    let chol = spd_cholesky(matrix.clone(), context)?;
    let l = chol.l();
    Ok(2.0 * (0..matrix.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Largest asymmetry max |M_ij − M_ji|.
pub fn symmetry_defect(matrix: &DMatrix<f64>) -> f64 {
    let mut defect: f64 = 0.0;
    for i in 0..matrix.nrows() {
        for j in (i + 1)..matrix.ncols() {
            defect = defect.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    defect
}

/// Errors unless the matrix is square and symmetric within `tol`.
pub fn check_symmetric(matrix: &DMatrix<f64>, tol: f64) -> Result<()> {
    if matrix.nrows() != matrix.ncols() {
        return Err(KbmfError::Shape(format!(
            "matrix is {}x{}, expected square",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let defect = symmetry_defect(matrix);
    if defect > tol {
        return Err(KbmfError::Data(format!(
            "matrix asymmetric: max |M - Mᵀ| entry {defect:.3e} exceeds {tol:.0e}"
        )));
    }
    Ok(())
}

/// (M + Mᵀ)/2.
pub fn symmetrize(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    (matrix + matrix.transpose()) * 0.5
}

/// Frobenius inner product Σ_ij A_ij B_ij.
pub fn frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Power-iteration estimates of the extreme eigenvalues of a symmetric matrix.
///
/// Returns (min, max). The max comes from plain power iteration; the min from
/// power iteration on the shifted matrix c·I − M. Deterministic starting
/// vector, fixed iteration budget; these are estimates, not certified bounds.
pub fn extreme_eigenvalues(matrix: &DMatrix<f64>, iterations: usize) -> (f64, f64) {
    let n = matrix.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let lambda_max_abs = power_iteration(matrix, iterations);
    // Shift so the spectrum becomes c - λ, all non-negative for c ≥ λ_max.
    let c = lambda_max_abs.abs() * 1.1 + 1e-12;
    let shifted = DMatrix::identity(n, n) * c - matrix;
    let lambda_min = c - power_iteration(&shifted, iterations);
    // Power iteration on M itself finds the dominant |λ|, which may be the
    // most negative one; combine with the shifted estimate for the max.
    let unshifted = DMatrix::identity(n, n) * c + matrix;
    let lambda_max = power_iteration(&unshifted, iterations) - c;
    (lambda_min, lambda_max)
}

fn power_iteration(matrix: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = matrix.nrows();
    // Deterministic, unlikely-to-be-orthogonal start.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.7).sin());
    v /= v.norm();
    let mut eig = 0.0;
    for _ in 0..iterations {
        let w = matrix * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        eig = v.dot(&w);
        v = w / norm;
    }
    eig
}
