//! SURE-tuned selection among candidate estimators, the oracle-gap bound
//! formulas and an adversarial pair on which SURE tuning loses `sigma n^{1/4}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ensure, Result, SteinError};
use crate::problem::RegressionProblem;
use crate::rng::{self, RngStream};
use crate::solvers::{fit_lasso, support_basis, FitResult, SolverOptions};
use crate::stein::sure;

/// Fits on a common response together with their SURE values.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub fits: Vec<FitResult>,
    pub sure_values: Vec<f64>,
    /// Common Lipschitz constant of the candidate maps.
    pub lipschitz: f64,
    /// `max_k trace((grad mu_k - grad mu_j0)^2)`, when known.
    pub s_star: Option<f64>,
}

impl CandidateSet {
    pub fn new(fits: Vec<FitResult>, y: &DVector<f64>, sigma: f64, lipschitz: f64) -> Result<Self> {
        ensure(!fits.is_empty(), || "candidate set is empty".into())?;
        ensure(lipschitz > 0.0 && lipschitz.is_finite(), || format!("Lipschitz constant must be positive, got {lipschitz}"))?;
        let sure_values = fits.iter().map(|f| sure(&f.mu_hat, y, f.df_hat, sigma)).collect::<Result<Vec<_>>>()?;
        Ok(Self { fits, sure_values, lipschitz, s_star: None })
    }

    pub fn with_s_star(mut self, s_star: f64) -> Result<Self> {
        ensure(s_star >= 0.0, || format!("s_star must be nonnegative, got {s_star}"))?;
        self.s_star = Some(s_star);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    /// The fitted mean chosen by [`sure_tune`].
    pub fn tuned(&self) -> Result<&FitResult> {
        Ok(&self.fits[sure_tune(self)?])
    }
}

/// Lasso fits along `lambdas`, warm-started in the given order.
pub fn lasso_candidates(problem: &RegressionProblem, lambdas: &[f64]) -> Result<CandidateSet> {
    let mut fits = Vec::with_capacity(lambdas.len());
    let mut warm: Option<DVector<f64>> = None;
    for &lambda in lambdas {
        let opts = SolverOptions { warm_start: warm.take(), ..SolverOptions::default() };
        let fit = fit_lasso(problem, lambda, &opts)?;
        warm = Some(fit.beta_hat.clone());
        fits.push(fit);
    }
    CandidateSet::new(fits, &problem.y, problem.sigma, 1.0)
}

/// Position of the smallest value, first one on ties. NaN is never selected
/// unless every value is NaN.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if v < values[b] || (values[b].is_nan() && !v.is_nan()) => best = Some(i),
            _ => {}
        }
    }
    best
}

/// Zero-based index of the candidate with the smallest SURE.
pub fn sure_tune(candidates: &CandidateSet) -> Result<usize> {
    argmin_first(&candidates.sure_values).ok_or_else(|| SteinError::InvalidArgument("candidate set is empty".into()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure(alpha > 0.0 && alpha < 1.0, || format!("level must lie in (0,1), got {alpha}"))
}

/// High-probability bound on `||mu_tilde - mu|| - ||mu_j0 - mu||`:
/// `sigma max((8 s* m / alpha)^{1/4}, (8 m (sqrt(2) L + 1) / alpha)^{1/2})`.
pub fn oracle_gap_bound(m: usize, alpha: f64, lipschitz: f64, s_star: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure(m >= 1 && s_star >= 0.0 && lipschitz > 0.0 && sigma > 0.0, || "invalid oracle bound arguments".into())?;
    let mf = m as f64;
    let a = (8.0 * s_star * mf / alpha).powf(0.25);
    let b = (8.0 * mf * (2f64.sqrt() * lipschitz + 1.0) / alpha).sqrt();
    Ok(sigma * a.max(b))
}

/// Sub-Gaussian companion `2 L sigma sqrt(2 log(m / delta))`.
pub fn oracle_gap_bound_subgaussian(m: usize, delta: f64, lipschitz: f64, sigma: f64) -> Result<f64> {
    check_alpha(delta)?;
    ensure(m >= 1, || "m must be positive".into())?;
    Ok(2.0 * lipschitz * sigma * (2.0 * (m as f64 / delta).ln()).sqrt())
}

/// Squared-risk companion `L sigma^2 sqrt(32 n m)`.
pub fn oracle_gap_bound_squared_risk(n: usize, m: usize, lipschitz: f64, sigma: f64) -> f64 {
    lipschitz * sigma * sigma * (32.0 * n as f64 * m as f64).sqrt()
}

/// `max_k trace((P_k - P_j0)^2)` over Lasso supports on a common design.
pub fn lasso_s_star(x: &DMatrix<f64>, supports: &[Vec<usize>], j0: usize) -> Result<f64> {
    ensure(j0 < supports.len(), || format!("reference index {j0} out of range"))?;
    let q0 = support_basis(x, &supports[j0])?;
    let mut best = 0.0_f64;
    for (k, s) in supports.iter().enumerate() {
        if k == j0 {
            continue;
        }
        let q = support_basis(x, s)?;
        let overlap = if s.is_empty() || supports[j0].is_empty() { 0.0 } else { q.tr_mul(&q0).norm_squared() };
        best = best.max((s.len() + supports[j0].len()) as f64 - 2.0 * overlap);
    }
    Ok(best)
}

/// Estimator in the Gaussian sequence model with an analytic divergence.
pub trait SequenceEstimator: Sync {
    fn estimate(&self, y: &DVector<f64>) -> DVector<f64>;

    fn divergence(&self, y: &DVector<f64>) -> f64;
}

#[derive(Debug, Clone)]
pub struct ZeroEstimator;

impl SequenceEstimator for ZeroEstimator {
    fn estimate(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(y.len())
    }

    fn divergence(&self, _y: &DVector<f64>) -> f64 {
        0.0
    }
}

/// `y -> v + G(y)` with `G` the componentwise symmetric triangle wave of
/// period `2H` and peak `H`.
#[derive(Debug, Clone)]
pub struct TriangleWaveEstimator {
    pub v: DVector<f64>,
    pub half_period: f64,
}

impl TriangleWaveEstimator {
    pub fn g(&self, u: f64) -> f64 {
        let h = self.half_period;
        let w = u.abs().rem_euclid(2.0 * h);
        w.min(2.0 * h - w)
    }

    /// Slope of `g`; `+-1` off the kinks.
    pub fn g_prime(&self, u: f64) -> f64 {
        let w = u.abs().rem_euclid(2.0 * self.half_period);
        let s = if w < self.half_period { 1.0 } else { -1.0 };
        if u < 0.0 {
            -s
        } else {
            s
        }
    }
}

impl SequenceEstimator for TriangleWaveEstimator {
    fn estimate(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(y.len(), |i, _| self.v[i] + self.g(y[i]))
    }

    fn divergence(&self, y: &DVector<f64>) -> f64 {
        y.iter().map(|&u| self.g_prime(u)).sum()
    }
}

/// The pair `mu1 = 0`, `mu2 = v + G(y)` with `v = sigma n^{-1/4} 1`, so that
/// `||v||^2 = sigma^2 sqrt(n)`, and `G` of peak `2^K sigma`.
pub fn adversarial_pair(n: usize, sigma: f64, period_exponent: i32) -> Result<(ZeroEstimator, TriangleWaveEstimator)> {
    ensure(n >= 1, || "n must be positive".into())?;
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
    let half_period = sigma * 2f64.powi(period_exponent);
    ensure(half_period > 0.0 && half_period.is_finite(), || format!("period exponent {period_exponent} out of range"))?;
    let v = DVector::from_element(n, sigma * (n as f64).powf(-0.25));
    Ok((ZeroEstimator, TriangleWaveEstimator { v, half_period }))
}

/// Default exponent: the wave is negligible against `v`.
pub const DEFAULT_PERIOD_EXPONENT: i32 = -20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdversarialOutcome {
    pub sure_zero: f64,
    pub sure_wave: f64,
    /// SURE picked the wave estimator, which has the larger risk.
    pub picks_worse: bool,
    /// `||mu_tilde - mu|| - min_j ||mu_j - mu||`.
    pub gap: f64,
}

/// One draw of `y = eps` (`mu = 0`) and the resulting SURE-tuned choice.
pub fn adversarial_trial(
    pair: &(ZeroEstimator, TriangleWaveEstimator),
    sigma: f64,
    stream: RngStream,
) -> Result<AdversarialOutcome> {
    let n = pair.1.v.len();
    let y = rng::sample_gaussian_vector(stream, n, sigma)?;
    let m1 = pair.0.estimate(&y);
    let m2 = pair.1.estimate(&y);
    let sure_zero = sure(&m1, &y, pair.0.divergence(&y), sigma)?;
    let sure_wave = sure(&m2, &y, pair.1.divergence(&y), sigma)?;
    let choice = argmin_first(&[sure_zero, sure_wave]).unwrap_or(0);
    let losses = [m1.norm(), m2.norm()];
    let gap = losses[choice] - losses[0].min(losses[1]);
    Ok(AdversarialOutcome { sure_zero, sure_wave, picks_worse: choice == 1, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> CandidateSet {
        let y = DVector::zeros(1);
        let fits = values.iter().map(|_| FitResult::from_mean(DVector::zeros(1), &y, 0.0, 0.0)).collect();
        CandidateSet { fits, sure_values: values.to_vec(), lipschitz: 1.0, s_star: None }
    }

    #[test]
    fn argmin_and_ties() {
        assert_eq!(sure_tune(&set(&[5.0, 3.0])).unwrap(), 1);
        assert_eq!(sure_tune(&set(&[3.0, 3.0])).unwrap(), 0);
        assert_eq!(argmin_first(&[f64::NAN, 2.0, 1.0]), Some(2));
        assert_eq!(argmin_first(&[]), None);
    }

    #[test]
    fn oracle_bound_single_candidate() {
        let b = oracle_gap_bound(1, 0.5, 1.0, 0.0, 2.0).unwrap();
        assert!((b - 2.0 * (16.0 * (2f64.sqrt() + 1.0)).sqrt()).abs() < 1e-12);
        let b1 = oracle_gap_bound(3, 0.2, 1.0, 50.0, 1.0).unwrap();
        let b2 = oracle_gap_bound(3, 0.1, 1.0, 50.0, 1.0).unwrap();
        assert!(b2 / b1 <= 2f64.sqrt() + 1e-12 && b2 / b1 >= 2f64.powf(0.25) - 1e-12);
    }

    #[test]
    fn companion_bounds() {
        let s = oracle_gap_bound_subgaussian(4, 0.1, 1.0, 1.0).unwrap();
        assert!((s - 2.0 * (2.0 * 40f64.ln()).sqrt()).abs() < 1e-12);
        assert!((oracle_gap_bound_squared_risk(2, 4, 1.0, 1.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_wave_shape() {
        let (_, w) = adversarial_pair(4, 1.0, 1).unwrap();
        assert_eq!(w.g(0.0), 0.0);
        assert_eq!(w.g(2.0), 2.0);
        assert_eq!(w.g(3.0), 1.0);
        assert_eq!(w.g(4.0), 0.0);
        assert_eq!(w.g(-3.0), 1.0);
        assert_eq!(w.g_prime(1.0), 1.0);
        assert_eq!(w.g_prime(3.0), -1.0);
        assert_eq!(w.g_prime(-1.0), -1.0);
        assert!((w.v.norm_squared() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lasso_s_star_of_nested_orthogonal_supports() {
        let x = DMatrix::identity(4, 4);
        let s = lasso_s_star(&x, &[vec![0], vec![0, 1, 2], vec![]], 0).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }
}
