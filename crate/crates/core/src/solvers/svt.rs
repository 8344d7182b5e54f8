use nalgebra::{DMatrix, DVector};

use super::soft_threshold_scalar;
use crate::error::{ensure, Result, SteinError};

/// Singular-value soft-thresholding of a matrix together with the exact
/// divergence of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct SvtResult {
    pub matrix: DMatrix<f64>,
    pub df_exact: f64,
    pub singular_values: DVector<f64>,
    /// Set when two singular values are closer than `1e-12 sigma_max`; the
    /// cross term for such pairs is omitted from `df_exact`.
    pub degenerate: bool,
}

pub fn svt(y: &DMatrix<f64>, lambda: f64) -> Result<SvtResult> {
    ensure(lambda >= 0.0 && lambda.is_finite(), || format!("lambda must be nonnegative, got {lambda}"))?;
    ensure(y.nrows() >= 1 && y.ncols() >= 1, || "matrix must be nonempty".into())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SteinError::Numeric("non-finite matrix entry".into()));
    }
    let (q, n) = (y.nrows(), y.ncols());
    let svd = y.clone().try_svd(true, true, f64::EPSILON, 0).ok_or(SteinError::SvdFailure)?;
    let sv = svd.singular_values.clone();
    if lambda == 0.0 {
        return Ok(SvtResult { matrix: y.clone(), df_exact: (q * n) as f64, singular_values: sv, degenerate: false });
    }
    let u = svd.u.as_ref().ok_or(SteinError::SvdFailure)?;
    let v_t = svd.v_t.as_ref().ok_or(SteinError::SvdFailure)?;
    let shrunk = sv.map(|s| soft_threshold_scalar(s, lambda));
    let matrix = u * DMatrix::from_diagonal(&shrunk) * v_t;
    let (df_exact, degenerate) = svt_divergence(&sv, q, n, lambda);
    Ok(SvtResult { matrix, df_exact, singular_values: sv, degenerate })
}

/// Divergence of singular-value soft-thresholding at singular values `sv` of a
/// `q x n` matrix.
pub fn svt_divergence(sv: &DVector<f64>, q: usize, n: usize, lambda: f64) -> (f64, bool) {
    let k = sv.len();
    let gap_dim = q.abs_diff(n) as f64;
    let s_max = sv.amax();
    let mut df = 0.0;
    for &s in sv.iter() {
        if s > lambda {
            df += 1.0 + gap_dim * (1.0 - lambda / s);
        }
    }
    let mut degenerate = false;
    let mut cross = 0.0;
    for i in 0..k {
        let si = sv[i];
        if si <= lambda {
            continue;
        }
        for j in 0..k {
            if i == j {
                continue;
            }
            let sj = sv[j];
            if (si - sj).abs() < 1e-12 * s_max {
                degenerate = true;
                continue;
            }
            cross += si * (si - lambda) / (si * si - sj * sj);
        }
    }
    (df + 2.0 * cross, degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_example() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 0.5]));
        let r = svt(&y, 1.0).unwrap();
        let expected = 1.0 + 2.0 * (5.0 * 4.0) / (25.0 - 0.25);
        assert!((r.df_exact - expected).abs() < 1e-12);
        assert!((r.matrix[(0, 0)].abs() - 4.0).abs() < 1e-12);
        assert!(r.matrix[(1, 1)].abs() < 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let r = svt(&y, 0.0).unwrap();
        assert_eq!(r.matrix, y);
        assert_eq!(r.df_exact, 6.0);
    }

    #[test]
    fn full_shrinkage_is_zero() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let r = svt(&y, 10.0).unwrap();
        assert!(r.matrix.amax() < 1e-12);
        assert_eq!(r.df_exact, 0.0);
    }

    #[test]
    fn repeated_singular_values_flagged() {
        let y = DMatrix::identity(3, 3) * 2.0;
        let r = svt(&y, 1.0).unwrap();
        assert!(r.degenerate);
    }
}
