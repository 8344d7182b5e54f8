//! Chi-square distribution function, quantiles, and the standardized
//! deviation quantiles used by the loss confidence regions.

use statrs::function::gamma::gamma_lr;

use crate::error::{ensure, Result, SteinError};

const MAX_BISECTION: usize = 200;

/// `P(chi2_df <= x)` via the regularized lower incomplete gamma function.
pub fn chi_square_cdf(df: u64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(df as f64 / 2.0, x / 2.0)
}

fn upper_bracket(df: u64) -> f64 {
    let d = df as f64;
    d + 20.0 * (2.0 * d).sqrt() + 40.0
}

/// Quantile of the chi-square distribution by bisection on the CDF.
pub fn chi_square_quantile(df: u64, prob: f64) -> Result<f64> {
    ensure(df >= 1, || "degrees of freedom must be positive".into())?;
    ensure(prob > 0.0 && prob < 1.0, || format!("probability must lie in (0,1), got {prob}"))?;
    let mut lo = 0.0_f64;
    let mut hi = upper_bracket(df);
    if chi_square_cdf(df, hi) < prob {
        return Err(SteinError::Numeric(format!(
            "chi-square quantile {prob} lies beyond the bracket [0, {hi}] for df={df}"
        )));
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi_square_cdf(df, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let err = (chi_square_cdf(df, q) - prob).abs();
    if err > 1e-10 * prob.min(1.0 - prob).max(1e-300) && hi - lo > 4.0 * f64::EPSILON * hi {
        return Err(SteinError::Numeric(format!(
            "chi-square bisection did not converge (df={df}, prob={prob}, residual={err:e})"
        )));
    }
    Ok(q)
}

/// `v` solving `P{ |chi2_n - n| / sqrt(2n) > v } = alpha`.
pub fn two_sided_deviation_quantile(n: u64, alpha: f64) -> Result<f64> {
    ensure(n >= 1, || "n must be positive".into())?;
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0,1), got {alpha}"))?;
    let nf = n as f64;
    let scale = (2.0 * nf).sqrt();
    let coverage = |v: f64| {
        let upper = nf + v * scale;
        let lower = nf - v * scale;
        chi_square_cdf(n, upper) - chi_square_cdf(n, lower)
    };
    let target = 1.0 - alpha;
    let mut lo = 0.0_f64;
    let mut hi = (upper_bracket(n) - nf) / scale;
    if coverage(hi) < target {
        return Err(SteinError::Numeric(format!(
            "two-sided deviation quantile out of bracket (n={n}, alpha={alpha})"
        )));
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if coverage(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `v` solving `P{ (n - chi2_n) / sqrt(2n) > v } = alpha`.
pub fn lower_deviation_quantile(n: u64, alpha: f64) -> Result<f64> {
    let q = chi_square_quantile(n, alpha)?;
    let nf = n as f64;
    Ok((nf - q) / (2.0 * nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn df2_closed_form() {
        let q = chi_square_quantile(2, 1.0 - (-1.0f64).exp()).unwrap();
        assert!((q - 2.0).abs() < 1e-10, "{q}");
    }

    #[test]
    fn df1_matches_squared_normal_quantile() {
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
        let q = chi_square_quantile(1, 0.95).unwrap();
        assert!((q - z * z).abs() < 1e-9 * z * z, "{q} vs {}", z * z);
        assert!((q - 3.841459).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(chi_square_quantile(3, 0.0).is_err());
        assert!(chi_square_quantile(3, 1.0).is_err());
        assert!(chi_square_quantile(0, 0.5).is_err());
    }

    #[test]
    fn two_sided_quantile_df2_closed_form() {
        // P(|chi2_2 - 2| <= 2v) = e^{-1}(e^v - e^{-v}) for v <= 1
        let v = two_sided_deviation_quantile(2, 0.5).unwrap();
        let expected = (std::f64::consts::E / 4.0).asinh();
        assert!((v - expected).abs() < 1e-8, "{v} vs {expected}");
    }

    #[test]
    fn large_n_deviation_quantiles_approach_normal() {
        let n = 1_000_000;
        let v = two_sided_deviation_quantile(n, 0.05).unwrap();
        assert!((v - 1.96).abs() < 0.02, "{v}");
        let v_minus = lower_deviation_quantile(n, 0.05).unwrap();
        assert!((v_minus - 1.645).abs() < 0.02, "{v_minus}");
    }
}
