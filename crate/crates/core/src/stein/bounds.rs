use std::f64::consts::E;

use super::confidence::{ConfidenceInterval, IntervalKind};
use crate::error::{ensure, Result};

/// Per-draw bound on `Var(div f)`: `min(trace((grad f)^2) + ||(grad f) z||^2 / sigma^2, 2n)`.
///
/// The cap `2n` holds for 1-Lipschitz `f`; averaging the returned values over
/// draws bounds the variance.
pub fn divergence_variance_bound(trace_grad_sq: f64, grad_times_z_sq_norm: f64, sigma: f64, n: usize) -> Result<f64> {
    ensure(trace_grad_sq >= 0.0 && grad_times_z_sq_norm >= 0.0, || {
        format!("inputs must be nonnegative, got {trace_grad_sq} and {grad_times_z_sq_norm}")
    })?;
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
    Ok((trace_grad_sq + grad_times_z_sq_norm / (sigma * sigma)).min(2.0 * n as f64))
}

/// `3E + 4E log(e p / (E v 1))`, a bound on `Var(|S_hat|)` for the Lasso.
pub fn model_size_variance_bound(expected_size: f64, p: usize) -> Result<f64> {
    ensure(p >= 1, || "p must be positive".into())?;
    ensure(expected_size >= 0.0 && expected_size <= p as f64, || {
        format!("expected size must lie in [0, {p}], got {expected_size}")
    })?;
    let e = expected_size;
    Ok(3.0 * e + 4.0 * e * (E * p as f64 / e.max(1.0)).ln())
}

const BISECTION_STEPS: usize = 200;

fn bisect(mut lo: f64, mut hi: f64, inside_at_lo: bool, inside: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) == inside_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Confidence interval for `E|S_hat|` from the observed model size, with the
/// conservative constant `C = 1 / alpha`.
///
/// The interval is `{E : |S|/E + E/(|S| v 1) - 2 <= C (3 + 4 log(e p)) / (|S| v 1)}`.
/// It is not clipped at `p`.
pub fn model_size_ci(observed_size: usize, p: usize, alpha: f64) -> Result<ConfidenceInterval> {
    ensure(p >= 1, || "p must be positive".into())?;
    ensure(observed_size <= p, || format!("observed size {observed_size} exceeds p={p}"))?;
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0,1), got {alpha}"))?;
    let x = observed_size as f64;
    let xd = x.max(1.0);
    let r = (3.0 + 4.0 * (E * p as f64).ln()) / (alpha * xd);
    let deviance = |e: f64| x / e + e / xd - 2.0;
    let inside = |e: f64| deviance(e) <= r;
    let (lower, upper) = if observed_size == 0 {
        (0.0, 2.0 + r)
    } else {
        let mut hi = 2.0 * x;
        while inside(hi) {
            hi *= 2.0;
        }
        let upper = bisect(x, hi, true, inside);
        let mut lo = 0.5 * x;
        while inside(lo) {
            lo *= 0.5;
        }
        let lower = bisect(lo, x, false, inside);
        (lower, upper)
    };
    Ok(ConfidenceInterval { lower, upper, nominal_level: 1.0 - alpha, kind: IntervalKind::ModelSizeMean })
}

/// `sigma (1 + tau)(1 + gamma) sqrt((2/n) log(e p / (s0 v 1)))`.
pub fn lambda_re(sigma: f64, n: usize, p: usize, s0: usize, tau: f64, gamma: f64) -> f64 {
    let s = s0.max(1) as f64;
    sigma * (1.0 + tau) * (1.0 + gamma) * ((2.0 / n as f64) * (E * p as f64 / s).ln()).sqrt()
}

/// Bound on `E[|S_hat| + ||X(beta_hat - beta)||^2 / (2 sigma^2 tau)]` for the
/// Lasso at [`lambda_re`], given the restricted eigenvalue `re`.
pub fn expected_sparsity_re_bound(s0: usize, p: usize, tau: f64, gamma: f64, re: f64) -> f64 {
    let s = s0 as f64;
    let sd = s0.max(1) as f64;
    let lead = (tau.sqrt() + 1.0 / tau.sqrt()).powi(2);
    lead * ((1.0 + gamma).powi(2) * (s * (E * p as f64 / sd).ln() + sd) / (re * re) + 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_size_variance_examples() {
        assert_eq!(model_size_variance_bound(0.0, 50).unwrap(), 0.0);
        assert!((model_size_variance_bound(40.0, 40).unwrap() - 280.0).abs() < 1e-9);
        let v = model_size_variance_bound(10.0, 100).unwrap();
        assert!((v - (30.0 + 40.0 * (10.0 * E).ln())).abs() < 1e-12);
        assert!((v - 162.1034).abs() < 1e-4);
        assert!(model_size_variance_bound(101.0, 100).is_err());
    }

    #[test]
    fn model_size_ci_matches_quadratic_roots() {
        let (x, p, alpha) = (10.0, 100usize, 0.1);
        let ci = model_size_ci(10, p, alpha).unwrap();
        // x/E + E/x - 2 = r  <=>  E^2 - (2 + r) x E + x^2 = 0
        let r = (3.0 + 4.0 * (E * p as f64).ln()) / (alpha * x);
        let b = (2.0 + r) * x;
        let disc = (b * b - 4.0 * x * x).sqrt();
        assert!((ci.lower - (b - disc) / 2.0).abs() < 1e-6);
        assert!((ci.upper - (b + disc) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn model_size_ci_empty_model() {
        let ci = model_size_ci(0, 30, 0.2).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert!(ci.upper.is_finite() && ci.upper > 2.0);
        let near_one = model_size_ci(7, 30, 0.999).unwrap();
        assert!(near_one.contains(7.0));
    }

    #[test]
    fn divergence_bound_caps_at_2n() {
        assert_eq!(divergence_variance_bound(3.0, 2.0, 1.0, 10).unwrap(), 5.0);
        assert_eq!(divergence_variance_bound(30.0, 20.0, 1.0, 10).unwrap(), 20.0);
        assert_eq!(divergence_variance_bound(1.0, 8.0, 2.0, 10).unwrap(), 3.0);
    }

    #[test]
    fn lambda_re_formula() {
        let l = lambda_re(1.0, 500, 500, 5, 1.0, 1.0);
        assert!((l - 4.0 * ((2.0 / 500.0) * (E * 100.0).ln()).sqrt()).abs() < 1e-12);
        let b = expected_sparsity_re_bound(0, 10, 1.0, 1.0, 1.0);
        assert!((b - 4.0 * (4.0 + 0.25)).abs() < 1e-12);
    }
}
