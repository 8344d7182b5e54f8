use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stein_core::debias::{debias_theta, direction_setup};
use stein_core::divergence_mc::McOptions;
use stein_core::problem::{equicorrelated_covariance, spiked_beta};
use stein_core::rng::{iid_gaussian_matrix, standard_normal_vector, RngStream};
use stein_core::solvers::{fit_lasso, lasso, SolverOptions};
use stein_core::RegressionProblem;

#[test]
fn reported_quantities_are_consistent() {
    let (n, p) = (60, 80);
    let x = iid_gaussian_matrix(&mut RngStream::new(1, 0).rng(), n, p);
    let beta = spiked_beta(p, 3, 1.0).unwrap();
    let y = &x * &beta + standard_normal_vector(&mut RngStream::new(1, 1).rng(), n);
    let prob = RegressionProblem::new(x.clone(), y.clone(), Some(beta.clone()), 1.0).unwrap();
    let fit = fit_lasso(&prob, 0.25, &SolverOptions::default()).unwrap();
    let mut a0 = DVector::zeros(p);
    a0[0] = 1.0;
    let d = direction_setup(&a0, &DMatrix::identity(p, p), &x).unwrap();
    let r = debias_theta(&prob, &fit, &d, &McOptions::new(20), RngStream::new(1, 2)).unwrap();
    let denom = r.z0_sq_norm - r.nu_hat;
    assert!((r.theta_hat - (r.plug_in + (r.score + r.a_hat) / denom)).abs() < 1e-12);
    assert!((r.a_hat - (r.b_hat + r.plug_in * r.nu_hat)).abs() < 1e-12);
    assert!((r.pivot.unwrap() - denom * (r.theta_hat - beta[0])).abs() < 1e-12);
    assert!((r.z0_sq_norm - x.column(0).norm_squared()).abs() < 1e-9);
    assert!((r.score - x.column(0).dot(&(&y - &x * &fit.beta_hat))).abs() < 1e-9);
    assert!(r.v_star.unwrap() >= 0.0);
}

#[test]
fn unpenalized_scalar_case_is_least_squares() {
    let x = iid_gaussian_matrix(&mut RngStream::new(2, 0).rng(), 15, 1);
    let y = &x * DVector::from_vec(vec![-1.3]) + standard_normal_vector(&mut RngStream::new(2, 1).rng(), 15);
    let prob = RegressionProblem::new(x.clone(), y.clone(), None, 1.0).unwrap();
    let fit = lasso(&x, &y, 0.0, &SolverOptions::default()).unwrap();
    let d = direction_setup(&DVector::from_vec(vec![1.0]), &DMatrix::identity(1, 1), &x).unwrap();
    let r = debias_theta(&prob, &fit, &d, &McOptions::new(5), RngStream::new(2, 2)).unwrap();
    let ols = x.column(0).dot(&y) / x.column(0).norm_squared();
    assert!((r.theta_hat - ols).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn direction_invariants(seed in 0u64..1000, rho in 0.0f64..0.8, p in 2usize..8) {
        let x = iid_gaussian_matrix(&mut RngStream::new(seed, 0).rng(), 10, p);
        let sigma = equicorrelated_covariance(p, rho);
        let raw = standard_normal_vector(&mut RngStream::new(seed, 1).rng(), p);
        let d = direction_setup(&raw, &sigma, &x).unwrap();
        let inv = sigma.clone().try_inverse().unwrap();
        prop_assert!((d.a0.dot(&(&inv * &d.a0)) - 1.0).abs() < 1e-10);
        prop_assert!((&sigma * &d.u0 - &d.a0).amax() < 1e-10);
        prop_assert!((&d.q0 * &d.u0).amax() < 1e-10);
        prop_assert!((d.a0.transpose() * &d.q0).amax() < 1e-10);
        prop_assert!((&d.z0 * d.a0.transpose() + &d.xq0 - &x).amax() < 1e-10);
    }
}
