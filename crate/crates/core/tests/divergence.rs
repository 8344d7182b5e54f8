use nalgebra::{DMatrix, DVector};
use stein_core::divergence_mc::{mc_divergence, LassoMap, LinearMap, McOptions, VectorMap};
use stein_core::rng::{iid_gaussian_matrix, standard_normal_vector, RngStream};
use stein_core::stats::Summary;

#[test]
fn linear_map_estimates_the_trace() {
    // Var(z^T A z) = ||A||_F^2 + trace(A^2) for Gaussian z.
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
    let f = LinearMap::new(a.clone()).unwrap();
    let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let m = 20_000;
    let se = ((a.norm_squared() + (&a * &a).trace()) / m as f64).sqrt();
    let est = mc_divergence(&f, &y, &McOptions::new(m).step(1e-4), RngStream::new(1, 0)).unwrap();
    assert!((est.value - 6.0).abs() < 4.0 * se, "{} vs 6", est.value);
    assert!((est.se_bound - 2.0 * (3.0 / m as f64).sqrt()).abs() < 1e-15);
}

#[test]
fn lasso_map_error_respects_the_lipschitz_bound() {
    let (n, p, m) = (40, 60, 20);
    let x = iid_gaussian_matrix(&mut RngStream::new(2, 0).rng(), n, p);
    let f = LassoMap { x, lambda: 0.3 };
    let errs: Vec<f64> = (0..100)
        .map(|i| {
            let y = standard_normal_vector(&mut RngStream::new(3, i).rng(), n) * 2.0;
            let exact = f.divergence(&y).unwrap().unwrap();
            let est = mc_divergence(&f, &y, &McOptions::new(m), RngStream::new(4, i)).unwrap();
            (est.value - exact).powi(2)
        })
        .collect();
    let s = Summary::of(&errs);
    assert!(s.mean <= 4.0 * n as f64 / m as f64 + 4.0 * s.se, "mean squared error {}", s.mean);
}

#[test]
fn trace_of_square_for_a_linear_map() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
    let f = LinearMap::new(a.clone()).unwrap();
    let mut opts = McOptions::new(4000).step(1e-3);
    opts.with_trace_sq = true;
    let est = mc_divergence(&f, &DVector::zeros(2), &opts, RngStream::new(5, 0)).unwrap();
    let want = (&a * &a).trace();
    assert!((est.trace_sq.unwrap() - want).abs() < 0.25, "{:?} vs {want}", est.trace_sq);
}
