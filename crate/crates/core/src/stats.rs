//! Order-deterministic summary statistics.
//!
//! All reductions go through [`pairwise_sum`], which fixes the association
//! order by index so that results do not depend on how replications were
//! scheduled.

use serde::Serialize;

const PAIRWISE_BLOCK: usize = 32;

/// Sum with a fixed binary splitting of the index range.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Standard error of the sample mean.
pub fn std_error(values: &[f64]) -> f64 {
    std_dev(values) / (values.len() as f64).sqrt()
}

/// Mean, standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let sd = std_dev(values);
        Self {
            mean: mean(values),
            sd,
            se: sd / (values.len() as f64).sqrt(),
            count: values.len(),
        }
    }
}

/// Sample variance together with a delta-method standard error,
/// `sqrt((m4 - s^4) / R)`.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let var = variance(values);
    let m = mean(values);
    let fourth: Vec<f64> = values.iter().map(|v| (v - m).powi(4)).collect();
    let m4 = mean(&fourth);
    let se = ((m4 - var * var).max(0.0) / n as f64).sqrt();
    (var, se)
}

/// `|mean(d)| / se(d)` for a paired difference sample; zero when the
/// differences vanish identically.
pub fn paired_z(diff: &[f64]) -> f64 {
    let s = Summary::of(diff);
    if s.se == 0.0 {
        if s.mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        s.mean.abs() / s.se
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn variance_of_constant_is_zero() {
        assert_eq!(variance(&[3.0; 10]), 0.0);
        assert_eq!(paired_z(&[0.0; 10]), 0.0);
    }

    #[test]
    fn variance_small_sample() {
        // 1,2,3,4: mean 2.5, sum sq dev 5, unbiased 5/3
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }
}
