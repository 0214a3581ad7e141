//! Small dense-matrix helpers shared by the geometry and filter layers.
//!
//! Covariances are kept symmetric positive-definite by construction: every
//! congruence or Riccati-style product is re-symmetrized, definiteness is
//! checked through a Cholesky factorization, and a spectral floor is applied
//! only when a factorization fails outright (which is logged, never silent).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::geometry::GeometryError;

/// Smallest Cholesky pivot accepted when a factorization is used to solve.
pub const MIN_PIVOT: f64 = 1e-12;

/// Eigenvalue floor applied when repairing an indefinite covariance.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Absolute symmetry tolerance, scaled by the largest entry magnitude.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `M - Mᵀ`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Checks that `m` is square and symmetric up to [`SYMMETRY_TOL`] (relative to
/// the largest entry, with an absolute floor of 1).
pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<(), GeometryError> {
    if m.nrows() != m.ncols() {
        return Err(GeometryError::DimensionMismatch {
            expected: m.nrows(),
            actual: m.ncols(),
        });
    }
    let tol = SYMMETRY_TOL * max_abs(m).max(1.0);
    let asym = max_asymmetry(m);
    if asym > tol {
        return Err(GeometryError::NotSpd(format!(
            "{what} is not symmetric (max |M - Mᵀ| = {asym:.3e})"
        )));
    }
    Ok(())
}

/// Strict Cholesky factorization; fails on any non-positive pivot.
pub fn spd_cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>, GeometryError> {
    check_symmetric(m, what)?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFinite(what.to_string()));
    }
    Cholesky::new(m.clone())
        .ok_or_else(|| GeometryError::NotSpd(format!("{what} is not positive-definite")))
}

/// Cholesky factorization that additionally rejects pivots below `min_pivot`.
/// Used wherever the factor is inverted, so that nearly singular matrices are
/// reported instead of amplified.
pub fn spd_cholesky_with_pivot(
    m: &DMatrix<f64>,
    min_pivot: f64,
    what: &str,
) -> Result<Cholesky<f64, Dyn>, GeometryError> {
    let chol = spd_cholesky(m, what)?;
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        let pivot = l[(i, i)] * l[(i, i)];
        if pivot < min_pivot {
            return Err(GeometryError::NotSpd(format!(
                "{what} is numerically singular (pivot {pivot:.3e} < {min_pivot:.0e})"
            )));
        }
    }
    Ok(chol)
}

/// Clamps the spectrum of a symmetric matrix to `[floor, ∞)`.
pub fn eigenvalue_floor(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let clamped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(floor)),
    );
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&clamped);
    symmetrize(&(scaled * eig.eigenvectors.transpose()))
}

/// Returns a covariance that is guaranteed SPD: the input when its Cholesky
/// succeeds, otherwise the eigenvalue-floored repair. Repairs are logged; they
/// indicate the surrounding algebra lost definiteness to rounding.
pub fn ensure_spd(m: &DMatrix<f64>, what: &str) -> DMatrix<f64> {
    match spd_cholesky(m, what) {
        Ok(_) => m.clone(),
        Err(err) => {
            log::warn!("covariance repair for {what}: {err}; applying eigenvalue floor {EIGENVALUE_FLOOR:.0e}");
            eigenvalue_floor(m, EIGENVALUE_FLOOR)
        }
    }
}
