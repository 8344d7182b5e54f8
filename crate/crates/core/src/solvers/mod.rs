//! Penalized least-squares solvers and the thresholding estimators, with the
//! analytic gradient summaries of their fitted means.
//!
//! Penalty conventions: the Lasso minimizes
//! `||X b - y||^2 / (2n) + lambda ||b||_1`, and the Elastic-Net adds
//! `gamma ||b||^2 / (2n)`, so that the Jacobian of `y -> X b_hat` on the
//! support is `X_S (X_S^T X_S + gamma I)^{-1} X_S^T`.

mod coordinate_descent;
mod kkt;
mod svt;

use nalgebra::{DMatrix, DVector};

pub use coordinate_descent::{elastic_net, lasso, objective};
pub use kkt::{check_kkt, KktReport};
pub use svt::{svt, SvtResult};

use crate::error::Result;
use crate::linalg;
use crate::problem::RegressionProblem;

/// Which estimator produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitKind {
    Lasso,
    ElasticNet { gamma: f64 },
    /// Any other estimator of the mean; `beta_hat` is empty.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Duality-gap tolerance; `None` selects `1e-10 (1 + ||y||^2 / n)`.
    pub tol: Option<f64>,
    /// Cap on coordinate sweeps.
    pub max_iter: usize,
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: None, max_iter: 100_000, warm_start: None }
    }
}

impl SolverOptions {
    pub fn with_warm_start(beta: DVector<f64>) -> Self {
        Self { warm_start: Some(beta), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub mu_hat: DVector<f64>,
    /// Indices of the exactly nonzero coefficients, increasing.
    pub support: Vec<usize>,
    /// Divergence of `y -> mu_hat`.
    pub df_hat: f64,
    /// `trace((grad mu_hat)^2)`.
    pub trace_grad_sq: f64,
    pub residual: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub duality_gap: f64,
    pub lambda: f64,
    pub kind: FitKind,
}

impl FitResult {
    /// Wraps an arbitrary fitted mean with its gradient summaries.
    pub fn from_mean(mu_hat: DVector<f64>, y: &DVector<f64>, df_hat: f64, trace_grad_sq: f64) -> Self {
        let residual = y - &mu_hat;
        Self {
            beta_hat: DVector::zeros(0),
            mu_hat,
            support: Vec::new(),
            df_hat,
            trace_grad_sq,
            residual,
            iterations: 0,
            converged: true,
            duality_gap: 0.0,
            lambda: 0.0,
            kind: FitKind::Other,
        }
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn residual_sq_norm(&self) -> f64 {
        self.residual.norm_squared()
    }
}

/// Lasso fit of `problem.y` on `problem.x`.
pub fn fit_lasso(problem: &RegressionProblem, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    lasso(&problem.x, &problem.y, lambda, opts)
}

/// Elastic-Net fit of `problem.y` on `problem.x`.
pub fn fit_elastic_net(
    problem: &RegressionProblem,
    lambda: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    elastic_net(&problem.x, &problem.y, lambda, gamma, opts)
}

/// Orthonormal basis of the span of the columns of `x` indexed by `support`.
pub fn support_basis(x: &DMatrix<f64>, support: &[usize]) -> Result<DMatrix<f64>> {
    linalg::orthonormal_basis(&linalg::select_columns(x, support))
}

/// `P_S = X_S (X_S^T X_S)^{-1} X_S^T`, the Jacobian of the Lasso fitted mean.
pub fn lasso_projection(problem: &RegressionProblem, fit: &FitResult) -> Result<DMatrix<f64>> {
    let q = support_basis(&problem.x, &fit.support)?;
    Ok(&q * q.transpose())
}

/// Componentwise `sign(y_i) max(|y_i| - t, 0)`.
///
/// # Panics
/// If `t` is negative or NaN.
pub fn soft_threshold(y: &DVector<f64>, t: f64) -> DVector<f64> {
    assert!(t >= 0.0, "threshold must be nonnegative, got {t}");
    y.map(|v| soft_threshold_scalar(v, t))
}

#[inline]
pub fn soft_threshold_scalar(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_definition() {
        let y = DVector::from_vec(vec![3.0, -0.5, 0.0]);
        assert_eq!(soft_threshold(&y, 1.0), DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(soft_threshold(&y, 0.0), y);
        assert_eq!(soft_threshold_scalar(-4.0, 1.5), -2.5);
    }

    #[test]
    fn from_mean_fills_residual() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let f = FitResult::from_mean(DVector::from_vec(vec![0.5, 0.5]), &y, 1.0, 1.0);
        assert_eq!(f.residual, DVector::from_vec(vec![0.5, 1.5]));
        assert_eq!(f.kind, FitKind::Other);
    }
}
