use nalgebra::DVector;
use serde::Serialize;

use crate::error::{ensure, Result, SteinError};
use crate::linalg::sign;
use crate::problem::RegressionProblem;

/// Lasso optimality diagnostics at a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// `max_{j not in S} |x_j^T r| / (n lambda)`.
    pub max_inactive_correlation: f64,
    /// `max_{j in S} |x_j^T r / (n lambda) - sgn(beta_j)|`.
    pub active_sign_error: f64,
    pub strict: bool,
}

/// Evaluates the Lasso KKT conditions; `strict` requires an inactive
/// correlation at most `1 - margin` and an active sign error at most `margin`.
pub fn check_kkt(
    problem: &RegressionProblem,
    lambda: f64,
    beta_hat: &DVector<f64>,
    margin: f64,
) -> Result<KktReport> {
    ensure(lambda > 0.0, || format!("lambda must be positive, got {lambda}"))?;
    ensure((0.0..1.0).contains(&margin), || format!("margin must lie in [0,1), got {margin}"))?;
    if beta_hat.len() != problem.p() {
        return Err(SteinError::DimensionMismatch(format!(
            "beta has length {} but X has {} columns",
            beta_hat.len(),
            problem.p()
        )));
    }
    let r = &problem.y - &problem.x * beta_hat;
    let corr = problem.x.tr_mul(&r) / (problem.n() as f64 * lambda);
    let mut max_inactive = 0.0f64;
    let mut sign_err = 0.0f64;
    for j in 0..beta_hat.len() {
        if beta_hat[j] == 0.0 {
            max_inactive = max_inactive.max(corr[j].abs());
        } else {
            sign_err = sign_err.max((corr[j] - sign(beta_hat[j])).abs());
        }
    }
    Ok(KktReport {
        max_inactive_correlation: max_inactive,
        active_sign_error: sign_err,
        strict: max_inactive <= 1.0 - margin && sign_err <= margin && max_inactive < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{fit_lasso, SolverOptions};
    use nalgebra::DMatrix;

    fn orthogonal_problem() -> RegressionProblem {
        let x = DMatrix::identity(2, 2) * 2f64.sqrt();
        RegressionProblem::new(x, DVector::from_vec(vec![3.0, 0.5]), None, 1.0).unwrap()
    }

    #[test]
    fn zero_solution_at_twice_lambda_max() {
        let p = orthogonal_problem();
        let lambda = 2.0 * p.x.tr_mul(&p.y).amax() / 2.0;
        let rep = check_kkt(&p, lambda, &DVector::zeros(2), 0.1).unwrap();
        assert!((rep.max_inactive_correlation - 0.5).abs() < 1e-15);
        assert!(rep.strict);
    }

    #[test]
    fn orthogonal_fit_has_exact_signs() {
        let p = orthogonal_problem();
        let fit = fit_lasso(&p, 1.0, &SolverOptions::default()).unwrap();
        let rep = check_kkt(&p, 1.0, &fit.beta_hat, 0.1).unwrap();
        assert!(rep.active_sign_error <= 1e-10);
        assert!(rep.strict);
    }

    #[test]
    fn perturbed_inactive_coordinate_breaks_strictness() {
        let p = orthogonal_problem();
        let fit = fit_lasso(&p, 1.0, &SolverOptions::default()).unwrap();
        let mut b = fit.beta_hat.clone();
        b[1] += 0.1;
        let rep = check_kkt(&p, 1.0, &b, 0.1).unwrap();
        assert!(rep.active_sign_error > 0.1);
        assert!(!rep.strict);
    }
}
