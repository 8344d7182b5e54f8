//! De-biased estimation of a linear contrast `theta = <a0, beta>` from a Lasso
//! fit, with the exact mean and variance of the resulting pivot.
//!
//! With `u0 = Sigma^{-1} a0`, `z0 = X u0` and `Q0 = I - u0 a0^T`, the design
//! splits as `X = z0 a0^T + X Q0` where `z0 ~ N(0, I_n)` is independent of
//! `X Q0`. The corrections `nu_hat` (response channel) and `B_hat` (design
//! channel) are traces of `X Q0` times the partial derivatives of `beta_hat`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::divergence_mc::{mc_divergence, MapOutput, McOptions, VectorMap};
use crate::error::{ensure, Result, SteinError};
use crate::linalg::{select_columns, sign};
use crate::problem::RegressionProblem;
use crate::rng::RngStream;
use crate::solvers::{lasso, FitKind, FitResult, SolverOptions};
use crate::stats;
use crate::stein::IdentityReport;

#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    /// Normalized so that `a0^T Sigma^{-1} a0 = 1`.
    pub a0: DVector<f64>,
    pub u0: DVector<f64>,
    pub z0: DVector<f64>,
    pub q0: DMatrix<f64>,
    /// `X Q0 = X - z0 a0^T`.
    pub xq0: DMatrix<f64>,
}

pub fn direction_setup(a0_raw: &DVector<f64>, sigma: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Direction> {
    let p = a0_raw.len();
    if sigma.nrows() != p || sigma.ncols() != p || x.ncols() != p {
        return Err(SteinError::DimensionMismatch(format!(
            "a0 has length {p}, Sigma is {}x{}, X has {} columns",
            sigma.nrows(),
            sigma.ncols(),
            x.ncols()
        )));
    }
    ensure(a0_raw.iter().any(|v| *v != 0.0), || "contrast direction must be nonzero".into())?;
    let chol = sigma.clone().cholesky().ok_or(SteinError::NotPositiveDefinite)?;
    let w = chol.solve(a0_raw);
    let norm_sq = a0_raw.dot(&w);
    ensure(norm_sq > 0.0 && norm_sq.is_finite(), || "a0^T Sigma^{-1} a0 must be positive".into())?;
    let scale = norm_sq.sqrt();
    let a0 = a0_raw / scale;
    let u0 = w / scale;
    let z0 = x * &u0;
    let q0 = DMatrix::identity(p, p) - &u0 * a0.transpose();
    let xq0 = x - &z0 * a0.transpose();
    Ok(Direction { a0, u0, z0, q0, xq0 })
}

/// `z -> X Q0 (beta_hat(y(z), X(z)) - offset)` with `X(z) = X + (z - z0) a0^T`
/// and `y(z) = y + theta (z - z0)`; `theta = 0` keeps the response fixed.
struct ContrastMap<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    dir: &'a Direction,
    lambda: f64,
    theta: f64,
    offset: DVector<f64>,
    support: Vec<usize>,
    signs: Vec<f64>,
}

/// `sum_j M[:, j] v[j]` over the nonzero entries of `v`.
fn sparse_mul(m: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for (j, &vj) in v.iter().enumerate() {
        if vj != 0.0 {
            out.axpy(vj, &m.column(j), 1.0);
        }
    }
    out
}

impl ContrastMap<'_> {
    /// Closed-form solution on the frozen support, if it satisfies the KKT
    /// conditions at the perturbed data. Works with `X + delta a0^T` without
    /// forming it.
    fn frozen(&self, delta: &DVector<f64>, yz: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.x.nrows() as f64;
        let p = self.x.ncols();
        let a0 = &self.dir.a0;
        let mut beta = DVector::zeros(p);
        if !self.support.is_empty() {
            let mut xs = select_columns(self.x, &self.support);
            for (k, &j) in self.support.iter().enumerate() {
                xs.column_mut(k).axpy(a0[j], delta, 1.0);
            }
            let rhs = xs.tr_mul(yz) - DVector::from_column_slice(&self.signs) * (n * self.lambda);
            let bs = xs.tr_mul(&xs).cholesky()?.solve(&rhs);
            for (k, &j) in self.support.iter().enumerate() {
                if sign(bs[k]) != self.signs[k] {
                    return None;
                }
                beta[j] = bs[k];
            }
        }
        let r = yz - sparse_mul(self.x, &beta) - delta * a0.dot(&beta);
        let dr = delta.dot(&r);
        let xr = self.x.tr_mul(&r);
        let bound = self.lambda * (1.0 + 1e-9);
        let inactive_ok = (0..p).filter(|j| beta[*j] == 0.0).all(|j| ((xr[j] + a0[j] * dr) / n).abs() <= bound);
        inactive_ok.then_some(beta)
    }
}

impl VectorMap for ContrastMap<'_> {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn eval(&self, z: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<MapOutput> {
        let delta = z - &self.dir.z0;
        let yz = self.y + &delta * self.theta;
        let beta = match self.frozen(&delta, &yz) {
            Some(b) => b,
            None => {
                let xz = self.x + &delta * self.dir.a0.transpose();
                let opts = SolverOptions { warm_start: warm.cloned(), ..SolverOptions::default() };
                lasso(&xz, &yz, self.lambda, &opts)?.beta_hat
            }
        };
        let value = sparse_mul(&self.dir.xq0, &(&beta - &self.offset));
        Ok(MapOutput { value, state: Some(beta) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebiasReport {
    pub theta_hat: f64,
    pub nu_hat: f64,
    pub a_hat: f64,
    pub b_hat: f64,
    pub z0_sq_norm: f64,
    /// `<a0, beta_hat>`.
    pub plug_in: f64,
    /// `z0^T (y - X beta_hat)`.
    pub score: f64,
    /// `(||z0||^2 - nu_hat)(theta_hat - theta)`, when `beta` is known.
    pub pivot: Option<f64>,
    /// `||X beta_hat - y - z0 a0^T (beta_hat - beta)||^2 + trace((grad f)^2)`,
    /// when `beta` is known; the trace is a Monte Carlo estimate.
    pub v_star: Option<f64>,
    pub trace_grad_sq: Option<f64>,
}

/// De-biased estimate of `<a0, beta>` from a Lasso fit of `problem`.
///
/// `B_hat` and the `trace((grad f)^2)` term are Monte Carlo estimates driven
/// by `mc`; the support is frozen for a perturbation whenever the frozen
/// solution satisfies the KKT conditions there, otherwise it is re-solved.
pub fn debias_theta(
    problem: &RegressionProblem,
    fit: &FitResult,
    dir: &Direction,
    mc: &McOptions,
    stream: RngStream,
) -> Result<DebiasReport> {
    ensure(fit.kind == FitKind::Lasso, || "de-biasing requires a Lasso fit".into())?;
    let (x, y) = (&problem.x, &problem.y);
    if dir.z0.len() != problem.n() || dir.a0.len() != problem.p() || fit.beta_hat.len() != problem.p() {
        return Err(SteinError::DimensionMismatch("direction, fit and problem disagree".into()));
    }
    let support = fit.support.clone();
    let signs: Vec<f64> = support.iter().map(|&j| sign(fit.beta_hat[j])).collect();

    // nu_hat = |S| - a0_S^T (X_S^T X_S)^{-1} X_S^T z0
    let nu_hat = if support.is_empty() {
        0.0
    } else {
        let xs = select_columns(x, &support);
        let chol = xs.tr_mul(&xs).cholesky().ok_or(SteinError::Singular)?;
        let w = chol.solve(&xs.tr_mul(&dir.z0));
        let a0s = DVector::from_iterator(support.len(), support.iter().map(|&j| dir.a0[j]));
        support.len() as f64 - a0s.dot(&w)
    };

    let design_map = ContrastMap {
        x,
        y,
        dir,
        lambda: fit.lambda,
        theta: 0.0,
        offset: DVector::zeros(problem.p()),
        support: support.clone(),
        signs: signs.clone(),
    };
    let b_opts = McOptions { with_trace_sq: false, with_dbar: false, ..mc.clone() };
    let b_hat = mc_divergence(&design_map, &dir.z0, &b_opts, stream.substream(0))?.value;

    let plug_in = dir.a0.dot(&fit.beta_hat);
    let a_hat = b_hat + plug_in * nu_hat;
    let z0_sq_norm = dir.z0.norm_squared();
    let denom = z0_sq_norm - nu_hat;
    if denom <= 0.0 {
        return Err(SteinError::IllPosedAdjustment(denom));
    }
    let score = dir.z0.dot(&(y - x * &fit.beta_hat));
    let theta_hat = plug_in + (score + a_hat) / denom;

    let (pivot, v_star, trace_grad_sq) = match &problem.beta {
        Some(beta) => {
            let theta = dir.a0.dot(beta);
            let total_map = ContrastMap { x, y, dir, lambda: fit.lambda, theta, offset: beta.clone(), support, signs };
            let t_opts = McOptions { m: mc.m.max(2), with_trace_sq: true, with_dbar: false, ..mc.clone() };
            let tr = mc_divergence(&total_map, &dir.z0, &t_opts, stream.substream(1))?
                .trace_sq
                .expect("trace estimate requested");
            let diff = &fit.beta_hat - beta;
            let resid = x * &fit.beta_hat - y - &dir.z0 * dir.a0.dot(&diff);
            (Some(denom * (theta_hat - theta)), Some(resid.norm_squared() + tr), Some(tr))
        }
        None => (None, None, None),
    };

    Ok(DebiasReport { theta_hat, nu_hat, a_hat, b_hat, z0_sq_norm, plug_in, score, pivot, v_star, trace_grad_sq })
}

/// Compares the empirical variance of the pivot with the mean of `v_star`.
///
/// The z-score uses `D_i = (p_i - mean p)^2 R / (R - 1) - v_i`, whose mean is
/// the difference of the two sides.
pub fn pivot_variance_check(reports: &[DebiasReport]) -> Result<IdentityReport> {
    let r = reports.len();
    ensure(r >= 2, || "at least two reports are required".into())?;
    let mut piv = Vec::with_capacity(r);
    let mut vs = Vec::with_capacity(r);
    for rep in reports {
        match (rep.pivot, rep.v_star) {
            (Some(p), Some(v)) => {
                piv.push(p);
                vs.push(v);
            }
            _ => return Err(SteinError::InvalidArgument("reports must come from simulation mode".into())),
        }
    }
    let pbar = stats::mean(&piv);
    let scale = r as f64 / (r as f64 - 1.0);
    let d: Vec<f64> = piv.iter().zip(&vs).map(|(p, v)| (p - pbar).powi(2) * scale - v).collect();
    let (var, var_se) = stats::variance_with_se(&piv);
    Ok(IdentityReport {
        lhs_mean: var,
        rhs_mean: stats::mean(&vs),
        lhs_se: var_se,
        rhs_se: stats::std_error(&vs),
        reps: r,
        z_score: stats::paired_z(&d),
    })
}

/// `|mean(pivot)| / SE(pivot)` over simulation-mode reports.
pub fn pivot_mean_z(reports: &[DebiasReport]) -> Result<f64> {
    let piv: Vec<f64> = reports.iter().filter_map(|r| r.pivot).collect();
    ensure(piv.len() == reports.len() && piv.len() >= 2, || "need at least two simulation-mode reports".into())?;
    Ok(stats::paired_z(&piv))
}
