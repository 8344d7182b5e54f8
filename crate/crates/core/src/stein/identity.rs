//! Monte Carlo checks of the second order Stein identity and its variants,
//! with `z ~ N(0, sigma^2 I_n)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Result, SteinError};
use crate::linalg::{trace_of_product, trace_of_square};
use crate::rng::{standard_normal_vector, RngStream};
use crate::stats::{self, Summary};

/// A map `R^n -> R^n`, optionally with its Jacobian `J[i][j] = d f_i / d z_j`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn value(&self, z: &DVector<f64>) -> Result<DVector<f64>>;

    /// `None` for the Jacobian selects central finite differences.
    fn value_and_jacobian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        Ok((self.value(z)?, None))
    }
}

/// A map `R^n -> R`, optionally with its gradient.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;

    fn value(&self, z: &DVector<f64>) -> Result<f64>;

    fn value_and_gradient(&self, z: &DVector<f64>) -> Result<(f64, Option<DVector<f64>>)> {
        Ok((self.value(z)?, None))
    }
}

fn fd_step(z: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + z.norm() / (z.len() as f64).sqrt())
}

/// Central-difference Jacobian with step `1e-5 (1 + ||z|| / sqrt(n))`.
pub fn finite_difference_jacobian<F: VectorField + ?Sized>(field: &F, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = z.len();
    let h = fd_step(z);
    let mut jac = DMatrix::zeros(n, n);
    let mut zp = z.clone();
    for j in 0..n {
        zp[j] = z[j] + h;
        let fp = field.value(&zp)?;
        zp[j] = z[j] - h;
        let fm = field.value(&zp)?;
        zp[j] = z[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

pub fn finite_difference_gradient<G: ScalarField + ?Sized>(field: &G, z: &DVector<f64>) -> Result<DVector<f64>> {
    let n = z.len();
    let h = fd_step(z);
    let mut grad = DVector::zeros(n);
    let mut zp = z.clone();
    for j in 0..n {
        zp[j] = z[j] + h;
        let gp = field.value(&zp)?;
        zp[j] = z[j] - h;
        let gm = field.value(&zp)?;
        zp[j] = z[j];
        grad[j] = (gp - gm) / (2.0 * h);
    }
    Ok(grad)
}

/// Value and Jacobian, falling back to finite differences.
pub fn jacobian_or_fd<F: VectorField + ?Sized>(field: &F, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (v, jac) = field.value_and_jacobian(z)?;
    let jac = match jac {
        Some(j) => j,
        None => finite_difference_jacobian(field, z)?,
    };
    Ok((v, jac))
}

fn gradient_or_fd<G: ScalarField + ?Sized>(field: &G, z: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let (v, g) = field.value_and_gradient(z)?;
    let g = match g {
        Some(g) => g,
        None => finite_difference_gradient(field, z)?,
    };
    Ok((v, g))
}

/// Both sides of an identity estimated by Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_se: f64,
    pub reps: usize,
    /// `|lhs - rhs|` over the standard error of the paired difference.
    pub z_score: f64,
}

impl IdentityReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.z_score <= threshold
    }

    /// Summary of paired per-draw values of the two sides.
    pub fn from_pairs(lhs: &[f64], rhs: &[f64]) -> Self {
        let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(l, r)| l - r).collect();
        let l = Summary::of(lhs);
        let r = Summary::of(rhs);
        Self {
            lhs_mean: l.mean,
            rhs_mean: r.mean,
            lhs_se: l.se,
            rhs_se: r.se,
            reps: lhs.len(),
            z_score: stats::paired_z(&diff),
        }
    }
}

fn draw(stream: RngStream, i: usize, n: usize, sigma: f64) -> DVector<f64> {
    standard_normal_vector(&mut stream.substream(i as u64).rng(), n) * sigma
}

fn check_args(n: usize, sigma: f64, reps: usize) -> Result<()> {
    ensure(n >= 1, || "field dimension must be positive".into())?;
    ensure(sigma > 0.0 && sigma.is_finite(), || format!("sigma must be positive, got {sigma}"))?;
    ensure(reps >= 100, || format!("at least 100 replications are required, got {reps}"))
}

fn tag<T>(i: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| SteinError::MapFailure { index: i, message: e.to_string() })
}

/// One draw of both sides of the second order identity at `z`:
/// `((z^T f - sigma^2 div f)^2, sigma^2 ||f||^2 + sigma^4 trace((grad f)^2))`.
pub fn sos_draw<F: VectorField + ?Sized>(field: &F, z: &DVector<f64>, sigma: f64) -> Result<(f64, f64)> {
    let s2 = sigma * sigma;
    let (f, jac) = jacobian_or_fd(field, z)?;
    let lhs = (z.dot(&f) - s2 * jac.trace()).powi(2);
    let rhs = s2 * f.norm_squared() + s2 * s2 * trace_of_square(&jac);
    Ok((lhs, rhs))
}

/// `E[(z^T f - sigma^2 div f)^2] = E[sigma^2 ||f||^2 + sigma^4 trace((grad f)^2)]`.
pub fn verify_sos_identity<F: VectorField + ?Sized>(
    field: &F,
    sigma: f64,
    reps: usize,
    stream: RngStream,
) -> Result<IdentityReport> {
    let n = field.dim();
    check_args(n, sigma, reps)?;
    let pairs: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let z = draw(stream, i, n, sigma);
            tag(i, sos_draw(field, &z, sigma))
        })
        .collect::<Result<_>>()?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(IdentityReport::from_pairs(&lhs, &rhs))
}

/// `E[(z^T f - sigma^2 div f)(z^T h - sigma^2 div h)] = E[sigma^2 f^T h + sigma^4 trace(grad f grad h)]`.
pub fn verify_inner_product_identity<F: VectorField + ?Sized, H: VectorField + ?Sized>(
    f: &F,
    h: &H,
    sigma: f64,
    reps: usize,
    stream: RngStream,
) -> Result<IdentityReport> {
    let n = f.dim();
    check_args(n, sigma, reps)?;
    if h.dim() != n {
        return Err(SteinError::DimensionMismatch(format!("fields have dimensions {n} and {}", h.dim())));
    }
    let s2 = sigma * sigma;
    let pairs: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let z = draw(stream, i, n, sigma);
            let (fv, jf) = tag(i, jacobian_or_fd(f, &z))?;
            let (hv, jh) = tag(i, jacobian_or_fd(h, &z))?;
            let lhs = (z.dot(&fv) - s2 * jf.trace()) * (z.dot(&hv) - s2 * jh.trace());
            let rhs = s2 * fv.dot(&hv) + s2 * s2 * trace_of_product(&jf, &jh);
            Ok((lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(IdentityReport::from_pairs(&lhs, &rhs))
}

const VARIANCE_BATCHES: usize = 50;

/// `Var(z^T f - sigma^2 div f - g) = E[sigma^2 ||f - grad g||^2 + sigma^4 trace((grad f)^2)] + Var(g) - sigma^2 E||grad g||^2`.
///
/// Both sides involve variances, so the z-score is computed from
/// `VARIANCE_BATCHES` independent batch estimates of their difference.
pub fn verify_general_variance<F: VectorField + ?Sized, G: ScalarField + ?Sized>(
    f: &F,
    g: &G,
    sigma: f64,
    reps: usize,
    stream: RngStream,
) -> Result<IdentityReport> {
    let n = f.dim();
    check_args(n, sigma, reps)?;
    if g.dim() != n {
        return Err(SteinError::DimensionMismatch(format!("fields have dimensions {n} and {}", g.dim())));
    }
    let s2 = sigma * sigma;
    // per draw: (w, g, sigma^2 ||f - grad g||^2 + sigma^4 tr(J^2), sigma^2 ||grad g||^2)
    let draws: Vec<[f64; 4]> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let z = draw(stream, i, n, sigma);
            let (fv, jac) = tag(i, jacobian_or_fd(f, &z))?;
            let (gv, grad) = tag(i, gradient_or_fd(g, &z))?;
            let w = z.dot(&fv) - s2 * jac.trace() - gv;
            let term = s2 * (&fv - &grad).norm_squared() + s2 * s2 * trace_of_square(&jac);
            Ok([w, gv, term, s2 * grad.norm_squared()])
        })
        .collect::<Result<_>>()?;

    let side = |rows: &[[f64; 4]]| -> (f64, f64) {
        let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let lhs = stats::variance(&col(0));
        let rhs = stats::mean(&col(2)) + stats::variance(&col(1)) - stats::mean(&col(3));
        (lhs, rhs)
    };
    let (lhs_all, rhs_all) = side(&draws);
    let batch = reps / VARIANCE_BATCHES;
    let per_batch: Vec<(f64, f64)> = (0..VARIANCE_BATCHES)
        .map(|b| {
            let end = if b + 1 == VARIANCE_BATCHES { reps } else { (b + 1) * batch };
            side(&draws[b * batch..end])
        })
        .collect();
    let lhs_b: Vec<f64> = per_batch.iter().map(|p| p.0).collect();
    let rhs_b: Vec<f64> = per_batch.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = per_batch.iter().map(|p| p.0 - p.1).collect();
    Ok(IdentityReport {
        lhs_mean: lhs_all,
        rhs_mean: rhs_all,
        lhs_se: stats::std_error(&lhs_b),
        rhs_se: stats::std_error(&rhs_b),
        reps,
        z_score: stats::paired_z(&diff),
    })
}
