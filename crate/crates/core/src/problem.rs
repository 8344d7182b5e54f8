//! Ground-truth containers for simulations and the design generators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result, SteinError};
use crate::rng::{self, RngStream};

/// Linear model `y = X beta + eps`, `eps ~ N(0, sigma^2 I_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta: Option<DVector<f64>>,
    pub sigma: f64,
    pub s0: usize,
}

impl RegressionProblem {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        beta: Option<DVector<f64>>,
        sigma: f64,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(SteinError::DimensionMismatch(format!(
                "X has {} rows but y has length {}",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(b) = &beta {
            if b.len() != x.ncols() {
                return Err(SteinError::DimensionMismatch(format!(
                    "X has {} columns but beta has length {}",
                    x.ncols(),
                    b.len()
                )));
            }
        }
        ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
        let s0 = beta.as_ref().map_or(0, |b| b.iter().filter(|v| **v != 0.0).count());
        Ok(Self { x, y, beta, sigma, s0 })
    }

    /// Draws `y = X beta + eps` with noise from `stream`.
    pub fn simulate(x: DMatrix<f64>, beta: DVector<f64>, sigma: f64, stream: RngStream) -> Result<Self> {
        if beta.len() != x.ncols() {
            return Err(SteinError::DimensionMismatch(format!(
                "X has {} columns but beta has length {}",
                x.ncols(),
                beta.len()
            )));
        }
        let eps = rng::sample_gaussian_vector(stream, x.nrows(), sigma)?;
        let y = &x * &beta + eps;
        Self::new(x, y, Some(beta), sigma)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `X beta`, when the truth is known.
    pub fn mean(&self) -> Option<DVector<f64>> {
        self.beta.as_ref().map(|b| &self.x * b)
    }

    /// Same design and truth with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.beta.clone(), self.sigma)
    }
}

/// Gaussian sequence model `y = mu + eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub mu: DVector<f64>,
    pub sigma: f64,
    pub y: DVector<f64>,
}

impl SequenceModel {
    pub fn new(mu: DVector<f64>, sigma: f64, y: DVector<f64>) -> Result<Self> {
        if mu.len() != y.len() {
            return Err(SteinError::DimensionMismatch(format!(
                "mu has length {} but y has length {}",
                mu.len(),
                y.len()
            )));
        }
        ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
        Ok(Self { mu, sigma, y })
    }

    pub fn sample(mu: DVector<f64>, sigma: f64, stream: RngStream) -> Result<Self> {
        let eps = rng::sample_gaussian_vector(stream, mu.len(), sigma)?;
        let y = &mu + eps;
        Self::new(mu, sigma, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

/// Design matrix families used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Design {
    /// `sqrt(n)` times the first `p` columns of `I_n`, so `X^T X = n I_p`.
    Orthonormal,
    /// iid `N(0, 1)` entries.
    IidGaussian,
    /// Rows iid `N(0, (1 - rho) I + rho 1 1^T)`.
    Equicorrelated { rho: f64 },
    /// iid symmetric `+-1` entries.
    Rademacher,
}

impl Design {
    pub fn build(&self, n: usize, p: usize, stream: RngStream) -> Result<DMatrix<f64>> {
        ensure(n >= 1 && p >= 1, || "design dimensions must be positive".into())?;
        match *self {
            Design::Orthonormal => {
                ensure(p <= n, || format!("orthonormal design needs p <= n, got n={n}, p={p}"))?;
                let mut x = DMatrix::zeros(n, p);
                let scale = (n as f64).sqrt();
                for j in 0..p {
                    x[(j, j)] = scale;
                }
                Ok(x)
            }
            Design::IidGaussian => Ok(rng::iid_gaussian_matrix(&mut stream.rng(), n, p)),
            Design::Equicorrelated { rho } => {
                ensure(rho > -1.0 / (p as f64 - 1.0).max(1.0) && rho < 1.0, || {
                    format!("equicorrelation rho={rho} does not give a positive definite covariance")
                })?;
                let sigma = equicorrelated_covariance(p, rho);
                rng::gaussian_design(stream, n, p, &sigma)
            }
            Design::Rademacher => {
                use rand::Rng;
                let mut r = stream.rng();
                let mut x = DMatrix::zeros(n, p);
                for i in 0..n {
                    for j in 0..p {
                        x[(i, j)] = if r.random::<bool>() { 1.0 } else { -1.0 };
                    }
                }
                Ok(x)
            }
        }
    }
}

pub fn equicorrelated_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
}

/// `beta` with `s0` leading entries equal to `amplitude` and the rest zero.
pub fn spiked_beta(p: usize, s0: usize, amplitude: f64) -> Result<DVector<f64>> {
    ensure(s0 <= p, || format!("s0={s0} exceeds p={p}"))?;
    Ok(DVector::from_fn(p, |j, _| if j < s0 { amplitude } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s0_counts_exact_nonzeros() {
        let x = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1e-300, 0.0, -2.0]);
        let p = RegressionProblem::new(x, DVector::zeros(3), Some(b), 1.0).unwrap();
        assert_eq!(p.s0, 2);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        let x = DMatrix::<f64>::zeros(3, 2);
        assert!(RegressionProblem::new(x.clone(), DVector::zeros(2), None, 1.0).is_err());
        assert!(RegressionProblem::new(x.clone(), DVector::zeros(3), Some(DVector::zeros(3)), 1.0).is_err());
        assert!(RegressionProblem::new(x, DVector::zeros(3), None, 0.0).is_err());
        assert!(SequenceModel::new(DVector::zeros(2), 1.0, DVector::zeros(3)).is_err());
    }

    #[test]
    fn orthonormal_design_has_scaled_gram() {
        let x = Design::Orthonormal.build(6, 4, RngStream::new(0, 0)).unwrap();
        let g = x.transpose() * &x;
        assert!((g - DMatrix::identity(4, 4) * 6.0).amax() < 1e-12);
        assert!(Design::Orthonormal.build(3, 4, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn rademacher_entries_are_signs() {
        let x = Design::Rademacher.build(20, 7, RngStream::new(3, 1)).unwrap();
        assert!(x.iter().all(|v| *v == 1.0 || *v == -1.0));
    }
}
