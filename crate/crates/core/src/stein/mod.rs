//! Stein's unbiased risk estimate, SURE for SURE and the identities behind
//! them.
//!
//! Noise is `N(0, sigma^2 I_n)` throughout and `sigma` is assumed known.

mod bounds;
mod confidence;
pub mod fields;
mod identity;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use bounds::{
    divergence_variance_bound, expected_sparsity_re_bound, lambda_re, model_size_ci,
    model_size_variance_bound,
};
pub use confidence::{
    data_driven_confidence, data_driven_kappa, loss_confidence_region, ConfidenceInterval, IntervalKind,
    LossRegions,
};
pub use identity::{
    finite_difference_gradient, finite_difference_jacobian, jacobian_or_fd, sos_draw, verify_general_variance,
    verify_inner_product_identity, verify_sos_identity, IdentityReport, ScalarField, VectorField,
};

use crate::error::{ensure, Result, SteinError};
use crate::solvers::{support_basis, FitKind, FitResult};

fn check_lengths(mu_hat: &DVector<f64>, y: &DVector<f64>, sigma: f64) -> Result<()> {
    if mu_hat.len() != y.len() {
        return Err(SteinError::DimensionMismatch(format!(
            "mu_hat has length {} but y has length {}",
            mu_hat.len(),
            y.len()
        )));
    }
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))
}

/// `||y - mu_hat||^2 + 2 sigma^2 df_hat - sigma^2 n`.
pub fn sure(mu_hat: &DVector<f64>, y: &DVector<f64>, df_hat: f64, sigma: f64) -> Result<f64> {
    check_lengths(mu_hat, y, sigma)?;
    let s2 = sigma * sigma;
    Ok((y - mu_hat).norm_squared() + 2.0 * s2 * df_hat - s2 * y.len() as f64)
}

/// SURE together with the three estimates of its squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SureReport {
    pub sure: f64,
    /// `4 sigma^2 ||y - mu_hat||^2 + 4 sigma^4 trace((grad mu_hat)^2) - 2 sigma^4 n`.
    pub r_hat: f64,
    /// `2 sigma^2 (||y - mu_hat||^2 + sure)`.
    pub r_prime: f64,
    /// `(3/4) r_prime + (1/4) r_hat - sigma^4 df_hat`.
    pub r_double_prime: f64,
    pub sigma: f64,
    pub n: usize,
}

pub fn sure_for_sure(
    mu_hat: &DVector<f64>,
    y: &DVector<f64>,
    df_hat: f64,
    trace_grad_sq: f64,
    sigma: f64,
) -> Result<SureReport> {
    check_lengths(mu_hat, y, sigma)?;
    ensure(trace_grad_sq >= 0.0, || format!("trace((grad mu)^2) must be nonnegative, got {trace_grad_sq}"))?;
    let n = y.len();
    let nf = n as f64;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let rss = (y - mu_hat).norm_squared();
    let sure = rss + 2.0 * s2 * df_hat - s2 * nf;
    let r_hat = 4.0 * s2 * rss + 4.0 * s4 * trace_grad_sq - 2.0 * s4 * nf;
    let r_prime = 2.0 * s2 * (rss + sure);
    let r_double_prime = 0.75 * r_prime + 0.25 * r_hat - s4 * df_hat;
    Ok(SureReport { sure, r_hat, r_prime, r_double_prime, sigma, n })
}

impl SureReport {
    pub fn from_fit(fit: &FitResult, y: &DVector<f64>, sigma: f64) -> Result<Self> {
        sure_for_sure(&fit.mu_hat, y, fit.df_hat, fit.trace_grad_sq, sigma)
    }
}

/// Source of `trace((grad mu1 - grad mu2)^2)` for [`sure_diff`].
#[derive(Debug, Clone, Copy)]
pub enum CrossTrace<'a> {
    /// Both fits are Lassos on this design; the trace is
    /// `trace((P_S1 - P_S2)^2)`.
    LassoDesign(&'a DMatrix<f64>),
    /// Caller-computed value.
    Supplied(f64),
    /// Only valid when the two fits coincide.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SureDiff {
    /// `SURE(mu1) - SURE(mu2)`.
    pub sure_diff: f64,
    /// Unbiased estimate of the squared error of `sure_diff` as an estimate
    /// of the loss difference: `4 sigma^2 ||mu1 - mu2||^2 + 4 sigma^4 trace((grad f)^2)`.
    pub r_hat_diff: f64,
}

pub fn sure_diff(
    fit1: &FitResult,
    fit2: &FitResult,
    y: &DVector<f64>,
    sigma: f64,
    cross: CrossTrace<'_>,
) -> Result<SureDiff> {
    check_lengths(&fit1.mu_hat, y, sigma)?;
    check_lengths(&fit2.mu_hat, y, sigma)?;
    let s2 = sigma * sigma;
    let f = &fit1.mu_hat - &fit2.mu_hat;
    let sure_diff = (y - &fit1.mu_hat).norm_squared() - (y - &fit2.mu_hat).norm_squared()
        + 2.0 * s2 * (fit1.df_hat - fit2.df_hat);
    let tr = match cross {
        CrossTrace::Supplied(t) => {
            ensure(t >= 0.0 && t.is_finite(), || format!("cross trace must be nonnegative, got {t}"))?;
            t
        }
        CrossTrace::LassoDesign(x) => {
            if fit1.kind != FitKind::Lasso || fit2.kind != FitKind::Lasso {
                return Err(SteinError::MissingCrossTrace(
                    "the projection formula applies to Lasso pairs only".into(),
                ));
            }
            lasso_pair_trace_sq(x, &fit1.support, &fit2.support)?
        }
        CrossTrace::Unavailable => {
            if fit1.mu_hat == fit2.mu_hat
                && fit1.kind == fit2.kind
                && fit1.support == fit2.support
                && fit1.df_hat == fit2.df_hat
                && fit1.lambda == fit2.lambda
            {
                0.0
            } else {
                return Err(SteinError::MissingCrossTrace(
                    "distinct fits need trace((grad mu1 - grad mu2)^2)".into(),
                ));
            }
        }
    };
    Ok(SureDiff { sure_diff, r_hat_diff: 4.0 * s2 * f.norm_squared() + 4.0 * s2 * s2 * tr })
}

/// `trace((P_S1 - P_S2)^2) = |S1| + |S2| - 2 ||Q1^T Q2||_F^2`.
pub fn lasso_pair_trace_sq(x: &DMatrix<f64>, s1: &[usize], s2: &[usize]) -> Result<f64> {
    let q1 = support_basis(x, s1)?;
    let q2 = support_basis(x, s2)?;
    let overlap = if s1.is_empty() || s2.is_empty() { 0.0 } else { q1.tr_mul(&q2).norm_squared() };
    Ok((s1.len() + s2.len()) as f64 - 2.0 * overlap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::RegressionProblem;
    use crate::solvers::{fit_lasso, SolverOptions};

    #[test]
    fn identity_estimator() {
        let y = DVector::from_vec(vec![0.3, -2.0, 5.0]);
        let r = sure_for_sure(&y, &y, 3.0, 3.0, 2.0).unwrap();
        assert_eq!(r.sure, 4.0 * 3.0);
        assert_eq!(r.r_hat, 2.0 * 16.0 * 3.0);
    }

    #[test]
    fn zero_estimator() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let z = DVector::zeros(2);
        let r = sure_for_sure(&z, &y, 0.0, 0.0, 1.5).unwrap();
        assert!((r.sure - (5.0 - 2.25 * 2.0)).abs() < 1e-12);
        assert!((r.r_hat - (4.0 * 2.25 * 5.0 - 2.0 * 2.25 * 2.25 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_lasso_example() {
        let x = DMatrix::identity(2, 2) * 2f64.sqrt();
        let p = RegressionProblem::new(x, DVector::from_vec(vec![3.0, 0.5]), None, 1.0).unwrap();
        let fit = fit_lasso(&p, 1.0, &SolverOptions::default()).unwrap();
        let r = SureReport::from_fit(&fit, &p.y, 1.0).unwrap();
        assert!((r.sure - 2.25).abs() < 1e-10);
        assert!((r.r_hat - 9.0).abs() < 1e-10);
        assert!((r.r_prime - 9.0).abs() < 1e-10);
    }

    #[test]
    fn diff_of_identity_and_zero() {
        let y = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let a = FitResult::from_mean(y.clone(), &y, 3.0, 3.0);
        let b = FitResult::from_mean(DVector::zeros(3), &y, 0.0, 0.0);
        let d = sure_diff(&a, &b, &y, 1.0, CrossTrace::Supplied(3.0)).unwrap();
        assert!((d.sure_diff - (6.0 - 6.0)).abs() < 1e-12);
        assert!((d.r_hat_diff - (4.0 * 6.0 + 12.0)).abs() < 1e-12);
        assert!(matches!(
            sure_diff(&a, &b, &y, 1.0, CrossTrace::Unavailable),
            Err(SteinError::MissingCrossTrace(_))
        ));
        let same = sure_diff(&a, &a, &y, 1.0, CrossTrace::Unavailable).unwrap();
        assert_eq!((same.sure_diff, same.r_hat_diff), (0.0, 0.0));
    }
}
