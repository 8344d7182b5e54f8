use statrs::distribution::{ContinuousCDF, Normal};
use stein_core::problem::Design;
use stein_core::stats::{self, variance_with_se};
use stein_core::stein::{
    data_driven_confidence, expected_sparsity_re_bound, loss_confidence_region, model_size_variance_bound,
    SureReport,
};

use super::{replicate, z_of, Outcome, Regression, Replicated};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::results::Verdict;

/// Per-replication summary of one regression fit.
#[derive(Debug, Clone, Copy)]
struct FitDraw {
    report: SureReport,
    loss: f64,
    df: f64,
    trace_sq: f64,
    size: f64,
}

fn simulate(cfg: &ExperimentConfig) -> Result<(Regression, Replicated<FitDraw>)> {
    let reg = Regression::new(cfg)?;
    let reps = replicate(cfg, |_, stream| {
        let y = reg.response(stream);
        let fit = reg.fit(&y)?;
        let report = SureReport::from_fit(&fit, &y, reg.sigma)?;
        Ok(FitDraw {
            report,
            loss: (&fit.mu_hat - &reg.mean).norm_squared(),
            df: fit.df_hat,
            trace_sq: fit.trace_grad_sq,
            size: fit.support.len() as f64,
        })
    })?;
    Ok((reg, reps))
}

fn base_records(reps: &Replicated<FitDraw>) -> Vec<crate::results::Record> {
    reps.records(|d| {
        vec![
            ("sure", d.report.sure),
            ("loss", d.loss),
            ("r_hat", d.report.r_hat),
            ("r_prime", d.report.r_prime),
            ("r_double_prime", d.report.r_double_prime),
            ("df", d.df),
            ("trace_grad_sq", d.trace_sq),
            ("support_size", d.size),
        ]
    })
}

fn sure4sure_verdict(out: &mut Outcome, reps: &Replicated<FitDraw>) {
    let d = reps.column(|d| d.report.r_hat - (d.report.sure - d.loss).powi(2));
    out.summary("sure4sure_bias_z", z_of(&d));
    out.verdicts.push(Verdict::z("sure4sure_unbiased", z_of(&d), "|mean(r_hat - (sure - loss)^2)| / SE"));
}

pub(super) fn sure_unbiased(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (reg, reps) = simulate(cfg)?;
    let mut out = Outcome { records: base_records(&reps), ..Outcome::default() };
    let s2 = cfg.sigma * cfg.sigma;
    let s4 = s2 * s2;
    let nf = cfg.n as f64;

    let sure = reps.column(|d| d.report.sure);
    let loss = reps.column(|d| d.loss);
    out.describe("sure", &sure);
    out.describe("loss", &loss);
    out.summary("lambda", reg.lambda);
    let diff: Vec<f64> = sure.iter().zip(&loss).map(|(s, l)| s - l).collect();
    out.verdicts.push(Verdict::z("sure_unbiased", z_of(&diff), "|mean(sure - loss)| / SE"));
    sure4sure_verdict(&mut out, &reps);

    let r_prime = reps.column(|d| d.report.r_prime);
    let rp = stats::Summary::of(&r_prime);
    out.summary("r_prime_mean", rp.mean);
    out.verdicts.push(Verdict::z(
        "r_prime_lower_bound",
        ((s4 * nf - rp.mean) / rp.se).max(0.0),
        "shortfall of mean(r_prime) below sigma^4 n, in SEs",
    ));

    // quartic risk of sqrt(SURE_+) against the root mean loss
    let root_loss = stats::mean(&loss).sqrt();
    let quartic: Vec<f64> = sure.iter().map(|s| (s.max(0.0).sqrt() - root_loss).powi(4)).collect();
    let lhs = stats::mean(&quartic).powf(0.25);
    let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
    let rhs = stats::mean(&sq).powf(0.25) + 3.0 * cfg.sigma;
    out.verdicts.push(Verdict::at_most(
        "sqrt_sure_quartic_risk",
        lhs,
        rhs,
        "mean((sqrt(sure_+) - sqrt(mean loss))^4)^(1/4) vs mean((sure - loss)^2)^(1/4) + 3 sigma",
    ));

    let (var_rp, var_rp_se) = variance_with_se(&r_prime);
    let r_dd = stats::Summary::of(&reps.column(|d| d.report.r_double_prime));
    let bound = 16.0 * s4 * r_dd.mean;
    let se = (var_rp_se.powi(2) + (16.0 * s4 * r_dd.se).powi(2)).sqrt();
    out.summary("r_prime_variance", var_rp);
    out.verdicts.push(Verdict::at_most(
        "sure4sure_variance_bound",
        var_rp,
        bound + 4.0 * se,
        format!("Var(r_prime) vs 16 sigma^4 mean(r_double_prime) = {bound:.6} + 4 SE"),
    ));

    if reg.gamma.is_none() {
        let worst = reps
            .ok()
            .iter()
            .map(|d| (d.report.r_hat - d.report.r_prime).abs() / d.report.r_hat.abs().max(1.0))
            .fold(0.0, f64::max);
        out.verdicts.push(Verdict::at_most("r_hat_equals_r_prime", worst, 1e-8, "Lasso: relative |r_hat - r_prime|"));
    }
    Ok(out)
}

pub(super) fn consistency(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, reps) = simulate(cfg)?;
    let mut out = Outcome { records: base_records(&reps), ..Outcome::default() };
    let r_hat = reps.column(|d| d.report.r_hat);
    let m = stats::mean(&r_hat);
    let rel: Vec<f64> = r_hat.iter().map(|r| (r / m - 1.0).powi(2)).collect();
    let s = stats::Summary::of(&rel);
    out.summary("r_hat_mean", m);
    out.summary("relative_sq_error", s.mean);
    out.summary("relative_sq_error_se", s.se);
    let target = 16.0 / cfg.n as f64;
    out.verdicts.push(Verdict::at_most(
        "sure4sure_consistency",
        s.mean,
        target + 4.0 * s.se,
        format!("mean((r_hat / mean r_hat - 1)^2) vs 16/n = {target:.6} + 4 SE"),
    ));
    sure4sure_verdict(&mut out, &reps);
    Ok(out)
}

fn frequency(hits: impl Iterator<Item = bool>) -> (f64, usize) {
    let (mut k, mut total) = (0usize, 0usize);
    for h in hits {
        total += 1;
        k += h as usize;
    }
    (k as f64 / total.max(1) as f64, total)
}

fn binomial_se(p: f64, total: usize) -> f64 {
    (p * (1.0 - p) / total.max(1) as f64).sqrt()
}

/// Tolerance on empirical coverage frequencies.
const COVERAGE_SLACK: f64 = 0.03;

pub(super) fn coverage(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (_, reps) = simulate(cfg)?;
    let (sigma, n, alpha) = (cfg.sigma, cfg.n, cfg.alpha);
    let draws = reps.ok();
    let loss = reps.column(|d| d.loss);
    let trace = reps.column(|d| d.trace_sq);
    // empirical surrogate for the non-asymptotic slack
    let eps_n = 4.0 * (stats::mean(&loss) / (n as f64 * sigma * sigma) + stats::mean(&trace) / n as f64);
    let (beta1, beta2) = cfg.data_driven.unwrap_or((0.05, 0.05));

    let mut hits = Vec::with_capacity(draws.len());
    for d in &draws {
        let asym = loss_confidence_region(d.report.sure, sigma, n, alpha, None)?;
        let finite = if eps_n < 1.0 - alpha {
            Some(loss_confidence_region(d.report.sure, sigma, n, alpha, Some(eps_n))?)
        } else {
            None
        };
        let dd = data_driven_confidence(d.report.sure, d.df, sigma, n, alpha, beta1, beta2)?;
        hits.push([
            asym.two_sided.contains(d.loss),
            asym.upper.contains(d.loss),
            finite.is_some_and(|f| f.two_sided.contains(d.loss)),
            dd.contains(d.loss),
        ]);
    }
    let mut records = base_records(&reps);
    for (k, r) in records.iter_mut().filter(|r| r.error.is_none()).enumerate() {
        for (name, h) in ["covered_two_sided", "covered_upper", "covered_finite_sample", "covered_data_driven"]
            .iter()
            .zip(hits[k])
        {
            r.values.insert(name.to_string(), h as u8 as f64);
        }
    }
    let mut out = Outcome { records, ..Outcome::default() };
    out.summary("eps_n", eps_n);
    out.describe("loss", &loss);

    let nominal = 1.0 - alpha;
    let (two, total) = frequency(hits.iter().map(|h| h[0]));
    out.summary("coverage_two_sided", two);
    out.verdicts.push(Verdict::within(
        "coverage_two_sided",
        two,
        Some(nominal - COVERAGE_SLACK),
        Some(nominal + COVERAGE_SLACK),
        format!("asymptotic region, nominal {nominal}, {total} replications"),
    ));
    let (up, _) = frequency(hits.iter().map(|h| h[1]));
    out.summary("coverage_upper", up);
    out.verdicts.push(Verdict::at_least(
        "coverage_upper",
        up,
        nominal - 0.02,
        format!("one-sided asymptotic region, nominal {nominal}"),
    ));
    if eps_n < 1.0 - alpha {
        let (fin, _) = frequency(hits.iter().map(|h| h[2]));
        let level = 1.0 - alpha - eps_n;
        out.summary("coverage_finite_sample", fin);
        out.verdicts.push(Verdict::at_least(
            "coverage_finite_sample",
            fin,
            level - 4.0 * binomial_se(level, total),
            format!("two-sided region with eps_n = {eps_n:.6}, level {level:.6}"),
        ));
    }
    let (dd, _) = frequency(hits.iter().map(|h| h[3]));
    let level = 1.0 - (alpha + beta1 + beta2);
    out.summary("coverage_data_driven", dd);
    out.verdicts.push(Verdict::at_least(
        "coverage_data_driven",
        dd,
        level - COVERAGE_SLACK,
        format!("data-driven region, level {level:.6}"),
    ));
    Ok(out)
}

pub(super) fn model_size(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (reg, reps) = simulate(cfg)?;
    let mut out = Outcome { records: base_records(&reps), ..Outcome::default() };
    let size = reps.column(|d| d.size);
    let mean_size = stats::mean(&size);
    let (var, var_se) = variance_with_se(&size);
    let size_se = stats::std_error(&size);
    out.summary("support_size_mean", mean_size);
    out.summary("support_size_variance", var);
    out.summary("support_size_variance_se", var_se);
    out.summary("lambda", reg.lambda);

    let bound = model_size_variance_bound(mean_size, cfg.p)?.min(2.0 * cfg.n as f64);
    out.summary("variance_bound", bound);
    out.verdicts.push(Verdict::at_most(
        "model_size_variance",
        var,
        bound + 4.0 * var_se,
        format!("Var|S| vs min(2n, 3E + 4E log(ep/E)) = {bound:.6} + 4 SE"),
    ));

    let lasso = reg.gamma.is_none();
    if lasso && cfg.design == Design::Orthonormal {
        // |S| is a sum of independent Bernoulli(q_j)
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let scale = (cfg.n as f64).sqrt() / cfg.sigma;
        let q: Vec<f64> = reg
            .beta
            .iter()
            .map(|b| normal.cdf((b - reg.lambda) * scale) + normal.cdf((-b - reg.lambda) * scale))
            .collect();
        let exact_mean: f64 = q.iter().sum();
        let exact_var: f64 = q.iter().map(|q| q * (1.0 - q)).sum();
        out.summary("bernoulli_mean", exact_mean);
        out.summary("bernoulli_variance", exact_var);
        out.verdicts.push(Verdict::z(
            "bernoulli_variance",
            (var - exact_var).abs() / var_se,
            format!("|Var|S| - sum q(1-q)| / SE, sum q(1-q) = {exact_var:.6}"),
        ));
        out.verdicts.push(Verdict::z(
            "bernoulli_mean",
            (mean_size - exact_mean).abs() / size_se,
            format!("|mean|S| - sum q| / SE, sum q = {exact_mean:.6}"),
        ));

        if let Some((tau, gamma)) = cfg.re_tuning {
            let s2 = cfg.sigma * cfg.sigma;
            let v = reps.column(|d| d.size + d.loss / (2.0 * s2 * tau));
            let m = stats::mean(&v);
            let bound = expected_sparsity_re_bound(cfg.s0, cfg.p, tau, gamma, 1.0);
            out.summary("sparsity_risk_mean", m);
            out.summary("sparsity_risk_bound", bound);
            out.verdicts.push(Verdict::at_most(
                "expected_sparsity_re",
                m,
                bound,
                "mean(|S| + ||X(beta_hat - beta)||^2 / (2 sigma^2 tau)) at RE = 1",
            ));
        }
    }
    Ok(out)
}
