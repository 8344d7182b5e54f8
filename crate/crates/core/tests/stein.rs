use nalgebra::DVector;
use proptest::prelude::*;
use stein_core::chi2::{chi_square_cdf, chi_square_quantile};
use stein_core::rng::{iid_gaussian_matrix, standard_normal_vector, RngStream};
use stein_core::solvers::soft_threshold;
use stein_core::stats::{paired_z, Summary};
use stein_core::stein::fields::{ConstantField, IdentityField, LinearField, SoftThresholdField};
use stein_core::stein::{sure, sure_for_sure, verify_sos_identity};

#[test]
fn chi_square_reference_quantiles() {
    // Standard table values.
    let cases = [(1, 0.95, 3.841458820694124), (10, 0.5, 9.341817765591966), (5, 0.025, 0.8312116134866628)];
    for (df, prob, want) in cases {
        let q = chi_square_quantile(df, prob).unwrap();
        assert!((q - want).abs() < 1e-8 * want, "df={df} prob={prob}: {q}");
    }
}

#[test]
fn second_order_identity_for_simple_fields() {
    let n = 6;
    let a = iid_gaussian_matrix(&mut RngStream::new(1, 0).rng(), n, n);
    let c = DVector::from_fn(n, |i, _| i as f64 - 2.0);
    let s = RngStream::new(2, 0);
    let reports = [
        verify_sos_identity(&IdentityField { n }, 1.0, 20_000, s.substream(0)).unwrap(),
        verify_sos_identity(&ConstantField { c }, 1.5, 20_000, s.substream(1)).unwrap(),
        verify_sos_identity(&LinearField::new(a).unwrap(), 0.7, 20_000, s.substream(2)).unwrap(),
        verify_sos_identity(&SoftThresholdField { n, t: 0.8 }, 1.0, 20_000, s.substream(3)).unwrap(),
    ];
    for r in reports {
        assert!(r.passes(4.0), "{r:?}");
    }
}

#[test]
fn identity_field_population_value() {
    // E[(||z||^2 - n sigma^2)^2] = 2 n sigma^4.
    let r = verify_sos_identity(&IdentityField { n: 4 }, 2.0, 50_000, RngStream::new(3, 0)).unwrap();
    assert!((r.rhs_mean - 128.0).abs() < 4.0 * r.rhs_se);
    assert!((r.lhs_mean - 128.0).abs() < 4.0 * r.lhs_se);
}

#[test]
fn sure_is_unbiased_for_soft_thresholding() {
    // df of soft thresholding is the number of surviving coordinates.
    let (n, sigma, t) = (20, 1.0, 1.0);
    let mu = DVector::from_fn(n, |i, _| if i < 4 { 3.0 } else { 0.0 });
    let (mut diff, mut s4s) = (Vec::new(), Vec::new());
    for i in 0..8000 {
        let y = &mu + standard_normal_vector(&mut RngStream::new(4, i).rng(), n) * sigma;
        let est = soft_threshold(&y, t);
        let df = y.iter().filter(|v| v.abs() > t).count() as f64;
        let loss = (&est - &mu).norm_squared();
        let s = sure(&est, &y, df, sigma).unwrap();
        let r = sure_for_sure(&est, &y, df, df, sigma).unwrap();
        diff.push(s - loss);
        s4s.push(r.r_hat - (s - loss).powi(2));
    }
    assert!(paired_z(&diff) < 4.0, "SURE bias z = {}", paired_z(&diff));
    assert!(paired_z(&s4s) < 4.0, "SURE for SURE bias z = {}", paired_z(&s4s));
    assert!(Summary::of(&diff).se > 0.0);
}

#[test]
fn zero_estimator_algebra() {
    let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let z = DVector::zeros(3);
    let r = sure_for_sure(&z, &y, 0.0, 0.0, 1.0).unwrap();
    assert!((r.sure - (5.25 - 3.0)).abs() < 1e-12);
    assert!((r.r_hat - (4.0 * 5.25 - 6.0)).abs() < 1e-12);
    assert!((r.r_prime - 2.0 * (5.25 + r.sure)).abs() < 1e-12);
    assert!((r.r_double_prime - (0.75 * r.r_prime + 0.25 * r.r_hat)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn chi_square_quantile_inverts_cdf(df in 1u64..400, prob in 0.001f64..0.999) {
        let q = chi_square_quantile(df, prob).unwrap();
        prop_assert!((chi_square_cdf(df, q) - prob).abs() < 1e-9);
    }

    #[test]
    fn identity_estimator_is_exact(seed in 0u64..10_000, sigma in 0.1f64..5.0, n in 1usize..50) {
        let y = standard_normal_vector(&mut RngStream::new(seed, 0).rng(), n) * 3.0;
        let r = sure_for_sure(&y, &y, n as f64, n as f64, sigma).unwrap();
        let nf = n as f64;
        prop_assert!((r.sure - sigma * sigma * nf).abs() <= 1e-12 * sigma * sigma * nf);
        prop_assert!((r.r_hat - 2.0 * sigma.powi(4) * nf).abs() <= 1e-12 * sigma.powi(4) * nf);
    }
}
