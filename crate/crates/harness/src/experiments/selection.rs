use stein_core::selection::{adversarial_pair, adversarial_trial, argmin_first, lasso_s_star, oracle_gap_bound};
use stein_core::solvers::{lasso, SolverOptions};
use stein_core::stats;
use stein_core::stein::sure;

use super::{replicate, Outcome, Regression};
use crate::config::{ExperimentConfig, TuneSpec};
use crate::error::Result;
use crate::results::Verdict;

struct GridDraw {
    /// `||mu_k - mu||` per candidate.
    errors: Vec<f64>,
    supports: Vec<Vec<usize>>,
    chosen: usize,
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.tune.as_ref().expect("validated") {
        TuneSpec::LassoGrid { m, ratio } => lasso_grid(cfg, *m, *ratio),
        TuneSpec::Adversarial { c, period_exponent } => adversarial(cfg, *c, *period_exponent),
    }
}

/// Exceedance of the high-probability oracle bound by SURE tuning over a
/// Lasso path. The reference index `j0` minimizes the average error and
/// `s*` averages `max_k trace((P_k - P_j0)^2)` over replications.
fn lasso_grid(cfg: &ExperimentConfig, m: usize, ratio: f64) -> Result<Outcome> {
    let reg = Regression::new(cfg)?;
    let lambdas: Vec<f64> = (0..m).map(|k| reg.lambda * ratio.powi(k as i32)).collect();
    let reps = replicate(cfg, |_, stream| {
        let y = reg.response(stream);
        let mut errors = Vec::with_capacity(m);
        let mut supports = Vec::with_capacity(m);
        let mut sures = Vec::with_capacity(m);
        let mut warm = None;
        for &l in &lambdas {
            let fit = lasso(&reg.x, &y, l, &SolverOptions { warm_start: warm.take(), ..SolverOptions::default() })?;
            errors.push((&fit.mu_hat - &reg.mean).norm());
            sures.push(sure(&fit.mu_hat, &y, fit.df_hat, reg.sigma)?);
            warm = Some(fit.beta_hat);
            supports.push(fit.support);
        }
        let chosen = argmin_first(&sures).expect("nonempty grid");
        Ok(GridDraw { errors, supports, chosen })
    })?;

    let draws = reps.ok();
    let mean_errors: Vec<f64> = (0..m).map(|k| stats::mean(&draws.iter().map(|d| d.errors[k]).collect::<Vec<_>>())).collect();
    let j0 = argmin_first(&mean_errors).expect("nonempty grid");
    let s_each = draws.iter().map(|d| lasso_s_star(&reg.x, &d.supports, j0)).collect::<stein_core::Result<Vec<_>>>()?;
    let s_star = stats::mean(&s_each);
    let bound = oracle_gap_bound(m, cfg.alpha, 1.0, s_star, cfg.sigma)?;

    let gap = |d: &GridDraw| d.errors[d.chosen] - d.errors[j0];
    let mut out = Outcome {
        records: reps.records(|d| {
            vec![("chosen", d.chosen as f64), ("gap", gap(d)), ("error_chosen", d.errors[d.chosen]), ("error_j0", d.errors[j0])]
        }),
        ..Outcome::default()
    };
    let gaps: Vec<f64> = draws.iter().map(|d| gap(d)).collect();
    let exceed = gaps.iter().filter(|g| **g > bound).count() as f64 / gaps.len() as f64;
    let se = (cfg.alpha * (1.0 - cfg.alpha) / gaps.len() as f64).sqrt();
    out.summary("j0", j0 as f64);
    out.summary("s_star", s_star);
    out.summary("gap_bound", bound);
    out.summary("gap_max", gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.describe("gap", &gaps);
    out.summary("exceedance", exceed);
    out.verdicts.push(Verdict::at_most(
        "oracle_gap_exceedance",
        exceed,
        cfg.alpha + 4.0 * se,
        format!("frequency of gap above {bound:.6} vs alpha + 4 SE"),
    ));
    Ok(out)
}

/// Sequence model with `mu = 0`: the zero estimator against the wave.
fn adversarial(cfg: &ExperimentConfig, c: f64, period_exponent: i32) -> Result<Outcome> {
    let pair = adversarial_pair(cfg.n, cfg.sigma, period_exponent)?;
    let threshold = c * cfg.sigma * (cfg.n as f64).powf(0.25);
    let reps = replicate(cfg, |_, stream| adversarial_trial(&pair, cfg.sigma, stream))?;
    let mut out = Outcome {
        records: reps.records(|o| {
            vec![
                ("sure_zero", o.sure_zero),
                ("sure_wave", o.sure_wave),
                ("picks_worse", o.picks_worse as u8 as f64),
                ("gap", o.gap),
            ]
        }),
        ..Outcome::default()
    };
    let outcomes = reps.ok();
    let total = outcomes.len() as f64;
    let worse = outcomes.iter().filter(|o| o.picks_worse).count() as f64 / total;
    let large = outcomes.iter().filter(|o| o.picks_worse && o.gap >= threshold).count() as f64 / total;
    out.summary("picks_worse_frequency", worse);
    out.summary("large_gap_frequency", large);
    out.summary("gap_threshold", threshold);
    out.verdicts.push(Verdict::at_least(
        "adversarial_gap_frequency",
        large,
        0.05,
        format!("frequency of gap >= c sigma n^(1/4) = {threshold:.6}"),
    ));
    Ok(out)
}
