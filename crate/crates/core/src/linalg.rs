//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Matrices with a 2-norm condition number at or above this are treated as singular.
pub const CONDITION_CAP: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ones(n: usize) -> CVec {
    CVec::from_element(n, c(1.0, 0.0))
}

pub fn diag(entries: &[Complex64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(entries))
}

/// Stack vectors as the columns of a matrix.
pub fn columns(vectors: &[CVec]) -> CMat {
    CMat::from_columns(vectors)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Ratio of largest to smallest singular value, infinity when rank deficient.
pub fn condition_number(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a square matrix, refusing anything at or above [`CONDITION_CAP`].
pub fn checked_inverse(m: &CMat) -> Result<(CMat, f64)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Parameter(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let condition = condition_number(m);
    if !(condition < CONDITION_CAP) {
        return Err(Error::Conditioning { condition });
    }
    let inv = m.clone().full_piv_lu().try_inverse().ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    Ok((inv, condition))
}

/// Inverse without a conditioning check; fails only on exact singularity.
pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularChannel("matrix is not invertible".into()))
}

/// Full pivoting keeps graded matrices (Vandermonde with spread nodes) accurate.
pub fn determinant(m: &CMat) -> Complex64 {
    m.clone().full_piv_lu().determinant()
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn eigenvalues(m: &CMat) -> Option<Vec<Complex64>> {
    m.clone().schur().eigenvalues().map(|v| v.iter().copied().collect())
}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_diff(a: &CVec, b: &CVec) -> f64 {
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}
