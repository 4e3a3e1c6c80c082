//! Small dense symmetric linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WimError};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Builds a matrix from row-major rows.
pub fn from_rows(rows: &[&[f64]]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

/// Diagonal matrix with the given entries.
pub fn diag(v: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_column_slice(v))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let chol = symmetrize(m).cholesky().ok_or(WimError::SingularWim)?;
    let inv = chol.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(WimError::SingularWim)
    }
}

/// Generalized eigenvalues of the pencil `(a, b)` with `b` positive definite,
/// i.e. eigenvalues of `b^{-1/2} a b^{-1/2}`, ascending.
pub fn generalized_eigenvalues(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    let chol = symmetrize(b).cholesky().ok_or(WimError::SingularWim)?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(WimError::SingularWim)?;
    let c = &linv * symmetrize(a) * linv.transpose();
    Ok(sym_eigenvalues(&c))
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
