//! Reference fields with analytic Jacobians.

use nalgebra::{DMatrix, DVector};

use super::identity::{ScalarField, VectorField};
use crate::error::{ensure, Result, SteinError};
use crate::linalg::select_columns;
use crate::solvers::{elastic_net, lasso, soft_threshold, support_basis, SolverOptions};

fn check_dim(z: &DVector<f64>, n: usize) -> Result<()> {
    if z.len() != n {
        return Err(SteinError::DimensionMismatch(format!("field of dimension {n} evaluated at length {}", z.len())));
    }
    Ok(())
}

/// `f(z) = z`.
#[derive(Debug, Clone)]
pub struct IdentityField {
    pub n: usize,
}

impl VectorField for IdentityField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(z, self.n)?;
        Ok(z.clone())
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        Ok((self.value(z)?, Some(DMatrix::identity(self.n, self.n))))
    }
}

/// `f(z) = c`.
#[derive(Debug, Clone)]
pub struct ConstantField {
    pub c: DVector<f64>,
}

impl VectorField for ConstantField {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(z, self.c.len())?;
        Ok(self.c.clone())
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let n = self.c.len();
        Ok((self.value(z)?, Some(DMatrix::zeros(n, n))))
    }
}

/// `f(z) = A z` for square, not necessarily symmetric, `A`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub a: DMatrix<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        ensure(a.is_square() && a.nrows() > 0, || "linear field needs a nonempty square matrix".into())?;
        Ok(Self { a })
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(z, self.dim())?;
        Ok(&self.a * z)
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        Ok((self.value(z)?, Some(self.a.clone())))
    }
}

/// Componentwise soft-thresholding at `t`.
#[derive(Debug, Clone)]
pub struct SoftThresholdField {
    pub n: usize,
    pub t: f64,
}

impl VectorField for SoftThresholdField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(z, self.n)?;
        ensure(self.t >= 0.0, || format!("threshold must be nonnegative, got {}", self.t))?;
        Ok(soft_threshold(z, self.t))
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let v = self.value(z)?;
        let d = z.map(|x| if x.abs() > self.t { 1.0 } else { 0.0 });
        Ok((v, Some(DMatrix::from_diagonal(&d))))
    }
}

/// `z -> y - X beta_hat(y)` for the Lasso with `y = mean + z`.
#[derive(Debug, Clone)]
pub struct LassoResidualField {
    pub x: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub lambda: f64,
}

impl VectorField for LassoResidualField {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_jacobian(z)?.0)
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        check_dim(z, self.dim())?;
        let y = &self.mean + z;
        let fit = lasso(&self.x, &y, self.lambda, &SolverOptions::default())?;
        let q = support_basis(&self.x, &fit.support)?;
        let n = self.dim();
        let jac = DMatrix::identity(n, n) - &q * q.transpose();
        Ok((fit.residual, Some(jac)))
    }
}

/// `z -> y - X beta_hat(y)` for the Elastic-Net with `y = mean + z`.
#[derive(Debug, Clone)]
pub struct ElasticNetResidualField {
    pub x: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub lambda: f64,
    pub gamma: f64,
}

impl VectorField for ElasticNetResidualField {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_and_jacobian(z)?.0)
    }

    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        check_dim(z, self.dim())?;
        let y = &self.mean + z;
        let fit = elastic_net(&self.x, &y, self.lambda, self.gamma, &SolverOptions::default())?;
        let n = self.dim();
        let mut jac = DMatrix::identity(n, n);
        if !fit.support.is_empty() {
            let xs = select_columns(&self.x, &fit.support);
            let k = xs.ncols();
            let gram = xs.tr_mul(&xs) + DMatrix::identity(k, k) * self.gamma;
            let chol = gram.cholesky().ok_or(SteinError::NotPositiveDefinite)?;
            let h = &xs * chol.solve(&xs.transpose());
            jac -= h;
        }
        Ok((fit.residual, Some(jac)))
    }
}

/// `g(z) = w^T z`, for which `Var g = sigma^2 E||grad g||^2`.
#[derive(Debug, Clone)]
pub struct LinearForm {
    pub w: DVector<f64>,
}

impl ScalarField for LinearForm {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        check_dim(z, self.w.len())?;
        Ok(self.w.dot(z))
    }

    fn value_and_gradient(&self, z: &DVector<f64>) -> Result<(f64, Option<DVector<f64>>)> {
        Ok((self.value(z)?, Some(self.w.clone())))
    }
}

/// `g(z) = sum_i sin(z_i)`, a nonlinear scalar field with `Var g < sigma^2 E||grad g||^2`.
#[derive(Debug, Clone)]
pub struct SineSum {
    pub n: usize,
}

impl ScalarField for SineSum {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &DVector<f64>) -> Result<f64> {
        check_dim(z, self.n)?;
        Ok(z.iter().map(|v| v.sin()).sum())
    }

    fn value_and_gradient(&self, z: &DVector<f64>) -> Result<(f64, Option<DVector<f64>>)> {
        Ok((self.value(z)?, Some(z.map(f64::cos))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stein::identity::{finite_difference_gradient, finite_difference_jacobian};

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.0, 0.0, 2.0]);
        let z = DVector::from_vec(vec![0.3, -1.7, 2.2]);
        let lin = LinearField::new(a.clone()).unwrap();
        assert!((finite_difference_jacobian(&lin, &z).unwrap() - a).amax() < 1e-8);
        let st = SoftThresholdField { n: 3, t: 1.0 };
        let (_, j) = st.value_and_jacobian(&z).unwrap();
        assert!((finite_difference_jacobian(&st, &z).unwrap() - j.unwrap()).amax() < 1e-8);
        let g = SineSum { n: 3 };
        let (_, gr) = g.value_and_gradient(&z).unwrap();
        assert!((finite_difference_gradient(&g, &z).unwrap() - gr.unwrap()).amax() < 1e-8);
    }

    #[test]
    fn enet_residual_jacobian_matches_finite_differences() {
        let x = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let mean = DVector::from_fn(6, |i, _| if i < 2 { 3.0 } else { 0.0 });
        let f = ElasticNetResidualField { x, mean, lambda: 0.3, gamma: 0.7 };
        let z = DVector::from_vec(vec![0.2, -0.1, 0.4, 0.05, -0.3, 0.1]);
        let (_, j) = f.value_and_jacobian(&z).unwrap();
        let fd = finite_difference_jacobian(&f, &z).unwrap();
        assert!((fd - j.unwrap()).amax() < 1e-5);
    }

    #[test]
    fn rejects_wrong_length() {
        let f = IdentityField { n: 3 };
        assert!(f.value(&DVector::zeros(2)).is_err());
    }
}
