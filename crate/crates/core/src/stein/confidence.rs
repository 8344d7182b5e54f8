use serde::Serialize;

use crate::chi2::{lower_deviation_quantile, two_sided_deviation_quantile};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    TwoSidedLoss,
    UpperLoss,
    DataDrivenMeanLoss,
    ModelSizeMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub nominal_level: f64,
    pub kind: IntervalKind,
}

impl ConfidenceInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRegions {
    pub two_sided: ConfidenceInterval,
    pub upper: ConfidenceInterval,
}

fn check_common(sigma: f64, n: usize, alpha: f64) -> Result<()> {
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
    ensure(n >= 1, || "n must be positive".into())?;
    ensure(alpha > 0.0 && alpha < 1.0, || format!("alpha must lie in (0,1), got {alpha}"))
}

/// Confidence regions for the loss `||mu_hat - mu||^2` centred at SURE.
///
/// `eps_n = None` gives the asymptotic regions with `v0 = 0` and level
/// `1 - alpha`. `Some(eps)` uses `v0 = sqrt(eps)` and level `1 - alpha - eps`.
pub fn loss_confidence_region(
    sure_value: f64,
    sigma: f64,
    n: usize,
    alpha: f64,
    eps_n: Option<f64>,
) -> Result<LossRegions> {
    check_common(sigma, n, alpha)?;
    let eps = eps_n.unwrap_or(0.0);
    ensure(eps >= 0.0 && alpha + eps < 1.0, || format!("need eps_n >= 0 and alpha + eps_n < 1, got {eps}"))?;
    let v0 = eps.sqrt();
    let scale = sigma * sigma * (2.0 * n as f64).sqrt();
    let v_two = two_sided_deviation_quantile(n as u64, alpha)?;
    let v_low = lower_deviation_quantile(n as u64, alpha)?;
    let level = 1.0 - alpha - eps;
    let w = scale * (v_two + v0);
    let two_sided = ConfidenceInterval {
        lower: (sure_value - w).max(0.0),
        upper: (sure_value + w).max(0.0),
        nominal_level: level,
        kind: IntervalKind::TwoSidedLoss,
    };
    let upper = ConfidenceInterval {
        lower: 0.0,
        upper: (sure_value + scale * (v_low + v0)).max(0.0),
        nominal_level: level,
        kind: IntervalKind::UpperLoss,
    };
    Ok(LossRegions { two_sided, upper })
}

/// `2 (6 / (beta2 n))^{1/4} + 4 / sqrt(beta2 n)`.
pub fn data_driven_kappa(n: usize, beta2: f64) -> f64 {
    let bn = beta2 * n as f64;
    2.0 * (6.0 / bn).powf(0.25) + 4.0 / bn.sqrt()
}

/// Interval for the mean loss with the data-driven surrogate
/// `gamma_hat = 4 max(0, sure / (n sigma^2) + df_hat / n)`.
///
/// Valid for 1-Lipschitz estimators with symmetric positive semidefinite
/// gradient; the caller is responsible for that condition.
pub fn data_driven_confidence(
    sure_value: f64,
    df_hat: f64,
    sigma: f64,
    n: usize,
    alpha: f64,
    beta1: f64,
    beta2: f64,
) -> Result<ConfidenceInterval> {
    check_common(sigma, n, alpha)?;
    ensure(beta1 > 0.0 && beta2 > 0.0 && alpha + beta1 + beta2 < 1.0, || {
        format!("need positive beta1, beta2 with alpha + beta1 + beta2 < 1, got {beta1}, {beta2}")
    })?;
    let nf = n as f64;
    let s2 = sigma * sigma;
    let gamma_hat = 4.0 * (sure_value / (nf * s2) + df_hat / nf).max(0.0);
    let v = two_sided_deviation_quantile(n as u64, alpha)?;
    let half = s2 * (2.0 * nf).sqrt() * (v + (gamma_hat.sqrt() + data_driven_kappa(n, beta2)) / (2.0 * beta1).sqrt());
    Ok(ConfidenceInterval {
        lower: sure_value - half,
        upper: sure_value + half,
        nominal_level: 1.0 - (alpha + beta1 + beta2),
        kind: IntervalKind::DataDrivenMeanLoss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_example() {
        let k = data_driven_kappa(600, 0.02);
        let oracle = 2.0 * 0.5f64.powf(0.25) + 4.0 / 12f64.sqrt();
        assert!((k - oracle).abs() < 1e-12);
        assert!((k - 2.836493).abs() < 1e-6);
    }

    #[test]
    fn asymptotic_coefficients() {
        let n = 1_000_000;
        let r = loss_confidence_region(0.0, 1.0, n, 0.05, None).unwrap();
        let coef = r.two_sided.upper / (2.0 * n as f64).sqrt();
        assert!((coef - 1.96).abs() < 0.02, "{coef}");
        let up = r.upper.upper / (2.0 * n as f64).sqrt();
        assert!((up - 1.645).abs() < 0.02, "{up}");
        assert_eq!(r.two_sided.lower, 0.0);
        assert_eq!(r.two_sided.nominal_level, 0.95);
    }

    #[test]
    fn v0_widens_and_lowers_level() {
        let a = loss_confidence_region(100.0, 1.0, 50, 0.1, None).unwrap();
        let b = loss_confidence_region(100.0, 1.0, 50, 0.1, Some(0.04)).unwrap();
        let extra = 0.2 * 10.0;
        assert!((b.two_sided.upper - a.two_sided.upper - extra).abs() < 1e-9);
        assert!((b.upper.upper - a.upper.upper - extra).abs() < 1e-9);
        assert!((b.two_sided.nominal_level - 0.86).abs() < 1e-12);
        assert!(loss_confidence_region(1.0, 1.0, 50, 0.5, Some(0.6)).is_err());
    }

    #[test]
    fn zero_surrogate() {
        let ci = data_driven_confidence(0.0, 0.0, 1.0, 600, 0.05, 0.05, 0.02).unwrap();
        let v = two_sided_deviation_quantile(600, 0.05).unwrap();
        let half = 1200f64.sqrt() * (v + data_driven_kappa(600, 0.02) / 0.1f64.sqrt());
        assert!((ci.upper - half).abs() < 1e-9);
        assert!((ci.nominal_level - 0.88).abs() < 1e-12);
    }
}
