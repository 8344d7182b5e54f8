use nalgebra::{DMatrix, DVector};

use super::{soft_threshold_scalar, FitKind, FitResult, SolverOptions};
use crate::error::{ensure, Result, SteinError};
use crate::linalg;

const HARD_ZERO: f64 = 1e-12;
const MAX_INNER_SWEEPS: usize = 1_000;

/// `||X b - y||^2/(2n) + lambda ||b||_1 + gamma ||b||^2/(2n)`.
pub fn objective(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, lambda: f64, gamma: f64) -> f64 {
    let n = x.nrows() as f64;
    let r = y - x * b;
    r.norm_squared() / (2.0 * n) + lambda * b.lp_norm(1) + gamma * b.norm_squared() / (2.0 * n)
}

pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    let cd = solve(x, y, lambda, 0.0, opts)?;
    let k = cd.support.len();
    // rank is only meaningful at a converged solution
    if k > 0 && cd.converged {
        let rank = linalg::numerical_rank(&linalg::select_columns(x, &cd.support), linalg::RANK_TOL);
        if rank < k {
            return Err(SteinError::RankDeficient { rank, support: k });
        }
    }
    Ok(cd.into_fit(x, k as f64, k as f64, lambda, FitKind::Lasso))
}

pub fn elastic_net(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    gamma: f64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    ensure(gamma > 0.0 && gamma.is_finite(), || format!("gamma must be positive, got {gamma}"))?;
    let cd = solve(x, y, lambda, gamma, opts)?;
    let (df, tr_sq) = if cd.support.is_empty() {
        (0.0, 0.0)
    } else {
        let xs = linalg::select_columns(x, &cd.support);
        let sv = xs.singular_values();
        sv.iter().fold((0.0, 0.0), |(d, t), s| {
            let h = s * s / (s * s + gamma);
            (d + h, t + h * h)
        })
    };
    Ok(cd.into_fit(x, df, tr_sq, lambda, FitKind::ElasticNet { gamma }))
}

struct CdOutcome {
    beta: DVector<f64>,
    residual: DVector<f64>,
    support: Vec<usize>,
    iterations: usize,
    converged: bool,
    gap: f64,
}

impl CdOutcome {
    fn into_fit(self, x: &DMatrix<f64>, df: f64, tr_sq: f64, lambda: f64, kind: FitKind) -> FitResult {
        let mu_hat = x * &self.beta;
        FitResult {
            beta_hat: self.beta,
            mu_hat,
            support: self.support,
            df_hat: df,
            trace_grad_sq: tr_sq,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            duality_gap: self.gap,
            lambda,
            kind,
        }
    }
}

fn validate(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, opts: &SolverOptions) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(SteinError::DimensionMismatch(format!(
            "X has {} rows but y has length {}",
            x.nrows(),
            y.len()
        )));
    }
    ensure(x.nrows() >= 1 && x.ncols() >= 1, || "design must be nonempty".into())?;
    ensure(lambda >= 0.0 && lambda.is_finite(), || format!("lambda must be nonnegative, got {lambda}"))?;
    if let Some(w) = &opts.warm_start {
        if w.len() != x.ncols() {
            return Err(SteinError::DimensionMismatch(format!(
                "warm start has length {} but X has {} columns",
                w.len(),
                x.ncols()
            )));
        }
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(SteinError::Numeric("non-finite entry in X or y".into()));
    }
    Ok(())
}

fn solve(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64, opts: &SolverOptions) -> Result<CdOutcome> {
    validate(x, y, lambda, opts)?;
    if lambda == 0.0 {
        return solve_unpenalized(x, y, gamma);
    }
    let n = x.nrows();
    let p = x.ncols();
    let nf = n as f64;
    let tol = opts.tol.unwrap_or(1e-10 * (1.0 + y.norm_squared() / nf));
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / nf).collect();
    let denom: Vec<f64> = col_sq.iter().map(|c| c + gamma / nf).collect();

    let mut beta = opts.warm_start.clone().unwrap_or_else(|| DVector::zeros(p));
    let mut r = y - x * &beta;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let inner_tol = 1e-3 * tol;

    let update = |j: usize, beta: &mut DVector<f64>, r: &mut DVector<f64>| -> f64 {
        if denom[j] == 0.0 {
            return 0.0;
        }
        let old = beta[j];
        let rho = x.column(j).dot(r) / nf + col_sq[j] * old;
        let new = soft_threshold_scalar(rho, lambda) / denom[j];
        let delta = new - old;
        if delta != 0.0 {
            r.axpy(-delta, &x.column(j), 1.0);
            beta[j] = new;
        }
        denom[j] * delta * delta
    };

    while iterations < opts.max_iter {
        for j in 0..p {
            update(j, &mut beta, &mut r);
        }
        iterations += 1;
        gap = duality_gap(x, y, &beta, &r, lambda, gamma);
        if gap <= tol {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        for _ in 0..MAX_INNER_SWEEPS {
            if iterations >= opts.max_iter {
                break;
            }
            let mut max_step = 0.0f64;
            for &j in &active {
                max_step = max_step.max(update(j, &mut beta, &mut r));
            }
            iterations += 1;
            if max_step <= inner_tol {
                break;
            }
        }
    }

    hard_zero_cleanup(x, &mut beta, &mut r, lambda, gamma);
    r = y - x * &beta;
    let support = (0..p).filter(|&j| beta[j] != 0.0).collect();
    if converged {
        gap = duality_gap(x, y, &beta, &r, lambda, gamma);
    }
    Ok(CdOutcome { beta, residual: r, support, iterations, converged, gap })
}

/// Duality gap of the augmented-Lasso reformulation, divided by `n`.
fn duality_gap(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    r: &DVector<f64>,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let nf = x.nrows() as f64;
    let mut g = x.tr_mul(r);
    if gamma > 0.0 {
        g.axpy(-gamma, beta, 1.0);
    }
    let g_inf = g.amax();
    let pen = nf * lambda;
    let s = if g_inf > pen { pen / g_inf } else { 1.0 };
    let b_sq = beta.norm_squared();
    let primal = 0.5 * r.norm_squared() + 0.5 * gamma * b_sq + pen * beta.lp_norm(1);
    let mut ys = y.clone();
    ys.axpy(-s, r, 1.0);
    let dual = 0.5 * y.norm_squared() - 0.5 * (ys.norm_squared() + s * s * gamma * b_sq);
    ((primal - dual) / nf).max(0.0)
}

/// Zeroes coordinates below the hard-zero threshold when that does not
/// increase the objective.
fn hard_zero_cleanup(x: &DMatrix<f64>, beta: &mut DVector<f64>, r: &mut DVector<f64>, lambda: f64, gamma: f64) {
    let nf = x.nrows() as f64;
    for j in 0..beta.len() {
        let b = beta[j];
        if b == 0.0 || b.abs() > HARD_ZERO {
            continue;
        }
        let xr = x.column(j).dot(r);
        let c = x.column(j).norm_squared();
        // objective(beta with b_j = 0) - objective(beta)
        let change = (b * xr + 0.5 * c * b * b) / nf - lambda * b.abs() - gamma * b * b / (2.0 * nf);
        if change <= 0.0 {
            r.axpy(b, &x.column(j), 1.0);
            beta[j] = 0.0;
        }
    }
}

fn solve_unpenalized(x: &DMatrix<f64>, y: &DVector<f64>, gamma: f64) -> Result<CdOutcome> {
    let p = x.ncols();
    let beta = if gamma > 0.0 {
        let mut gram = x.tr_mul(x);
        for j in 0..p {
            gram[(j, j)] += gamma;
        }
        linalg::spd_solve(&gram, &x.tr_mul(y))?
    } else {
        let rank = linalg::numerical_rank(x, linalg::RANK_TOL);
        if rank < p {
            return Err(SteinError::RankDeficient { rank, support: p });
        }
        let qr = x.clone().qr();
        let qty = qr.q().tr_mul(y);
        qr.r()
            .solve_upper_triangular(&qty)
            .ok_or(SteinError::Singular)?
    };
    let residual = y - x * &beta;
    let support = (0..p).filter(|&j| beta[j] != 0.0).collect();
    Ok(CdOutcome { beta, residual, support, iterations: 0, converged: true, gap: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{iid_gaussian_matrix, RngStream};

    fn orthogonal_example() -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::identity(2, 2) * 2f64.sqrt();
        let y = DVector::from_vec(vec![3.0, 0.5]);
        (x, y)
    }

    #[test]
    fn orthogonal_design_matches_soft_threshold() {
        let (x, y) = orthogonal_example();
        let fit = lasso(&x, &y, 1.0, &SolverOptions::default()).unwrap();
        // b_j = soft(x_j^T y / n, lambda) / (||x_j||^2 / n)
        let expected = 3.0 / 2f64.sqrt() - 1.0;
        assert!((fit.beta_hat[0] - expected).abs() < 1e-12);
        assert_eq!(fit.beta_hat[1], 0.0);
        assert_eq!(fit.support, vec![0]);
        assert_eq!(fit.df_hat, 1.0);
        assert!((fit.residual_sq_norm() - 2.25).abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let mut rng = RngStream::new(11, 0).rng();
        let x = iid_gaussian_matrix(&mut rng, 30, 50);
        let y = crate::rng::standard_normal_vector(&mut rng, 30);
        let lmax = x.tr_mul(&y).amax() / 30.0;
        let fit = lasso(&x, &y, lmax, &SolverOptions::default()).unwrap();
        assert!(fit.support.is_empty());
        assert_eq!(fit.df_hat, 0.0);
        let en = elastic_net(&x, &y, lmax * 1.0001, 0.5, &SolverOptions::default()).unwrap();
        assert!(en.support.is_empty());
        assert_eq!(en.df_hat, 0.0);
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let mut rng = RngStream::new(12, 0).rng();
        let x = iid_gaussian_matrix(&mut rng, 20, 5);
        let y = crate::rng::standard_normal_vector(&mut rng, 20);
        let fit = lasso(&x, &y, 0.0, &SolverOptions::default()).unwrap();
        let normal = x.tr_mul(&fit.residual);
        assert!(normal.amax() < 1e-10);
        assert_eq!(fit.df_hat, 5.0);
        let wide = iid_gaussian_matrix(&mut rng, 4, 6);
        let y4 = crate::rng::standard_normal_vector(&mut rng, 4);
        assert!(matches!(
            lasso(&wide, &y4, 0.0, &SolverOptions::default()),
            Err(SteinError::RankDeficient { .. })
        ));
    }

    #[test]
    fn elastic_net_orthogonal_closed_form() {
        let n = 9usize;
        let nf = n as f64;
        let x = DMatrix::identity(n, n) * nf.sqrt();
        let y = DVector::from_fn(n, |i, _| (i as f64 - 4.0) * 0.7);
        let (lambda, gamma) = (0.5, 2.0);
        let fit = elastic_net(&x, &y, lambda, gamma, &SolverOptions::default()).unwrap();
        for j in 0..n {
            let expected = soft_threshold_scalar(nf.sqrt() * y[j], nf * lambda) / (nf + gamma);
            assert!((fit.beta_hat[j] - expected).abs() < 1e-10, "coordinate {j}");
        }
        let k = fit.support.len() as f64;
        assert!((fit.df_hat - k * nf / (nf + gamma)).abs() < 1e-10);
    }

    #[test]
    fn warm_start_reaches_same_solution() {
        let mut rng = RngStream::new(13, 0).rng();
        let x = iid_gaussian_matrix(&mut rng, 40, 60);
        let y = crate::rng::standard_normal_vector(&mut rng, 40);
        let cold = lasso(&x, &y, 0.1, &SolverOptions::default()).unwrap();
        let warm = lasso(&x, &y, 0.1, &SolverOptions::with_warm_start(cold.beta_hat.clone())).unwrap();
        assert!((&cold.beta_hat - &warm.beta_hat).amax() < 1e-8);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut rng = RngStream::new(14, 0).rng();
        let x = iid_gaussian_matrix(&mut rng, 40, 60);
        let y = crate::rng::standard_normal_vector(&mut rng, 40);
        let opts = SolverOptions { max_iter: 1, ..SolverOptions::default() };
        let fit = lasso(&x, &y, 0.01, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }
}
