//! Small dense linear-algebra helpers shared by the solvers and estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SteinError};

/// Columns of `x` listed in `idx`, in order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &x.column(j));
    }
    out
}

/// Numerical rank by column-pivoted QR, threshold `rel_tol * ||x||_F`.
pub fn numerical_rank(x: &DMatrix<f64>, rel_tol: f64) -> usize {
    if x.ncols() == 0 || x.nrows() == 0 {
        return 0;
    }
    let threshold = rel_tol * x.norm();
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].abs() > threshold)
        .count()
}

/// Orthonormal basis of the column span of a full-column-rank `x`.
pub fn orthonormal_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = x.ncols();
    if k == 0 {
        return Ok(DMatrix::zeros(x.nrows(), 0));
    }
    let rank = numerical_rank(x, RANK_TOL);
    if rank < k {
        return Err(SteinError::RankDeficient { rank, support: k });
    }
    Ok(x.clone().qr().q())
}

/// Relative threshold used for every rank decision in the crate.
pub const RANK_TOL: f64 = 1e-10;

/// `trace(A^2) = sum_ij a_ij a_ji`.
pub fn trace_of_square(a: &DMatrix<f64>) -> f64 {
    trace_of_product(a, a)
}

/// `trace(A B) = sum_ij a_ij b_ji`.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Solves the symmetric positive definite system `a x = b`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.clone().cholesky().ok_or(SteinError::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_detects_duplicate_columns() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 3.0, 3.0, 0.0]);
        assert_eq!(numerical_rank(&x, RANK_TOL), 2);
        assert!(matches!(
            orthonormal_basis(&x),
            Err(SteinError::RankDeficient { rank: 2, support: 3 })
        ));
    }

    #[test]
    fn trace_of_product_is_cyclic() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, 0.0, 1.0]);
        let direct = (&a * &b).trace();
        assert!((trace_of_product(&a, &b) - direct).abs() < 1e-12);
        assert!((trace_of_product(&b, &a) - direct).abs() < 1e-12);
    }
}
