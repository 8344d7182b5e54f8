use std::collections::BTreeMap;

use nalgebra::DMatrix;
use stein_core::divergence_mc::{df_table_experiment, mc_divergence, LassoMap, LinearMap, McOptions, VectorMap};
use stein_core::rng::{standard_normal_vector, RngStream};
use stein_core::stats;

use super::{replicate, z_of, Outcome, Regression};
use crate::config::{ExperimentConfig, McMapKind};
use crate::error::Result;
use crate::results::{Record, Verdict};

/// Relative tolerance on the mean estimate at the largest `m`.
const MEAN_TOLERANCE: f64 = 0.01;
/// Accepted range of `std(m) / std(4m)`; the ideal is 2.
const RATIO_RANGE: (f64, f64) = (1.4, 2.8);

/// One data realization; replication `r` is the `r`-th perturbation set at
/// every `m` of the grid.
pub(super) fn df_table(cfg: &ExperimentConfig) -> Result<Outcome> {
    let estimator = cfg.estimator.as_ref().expect("validated");
    let grid = cfg.m_grid.as_ref().expect("validated");
    let table = df_table_experiment(estimator, grid, cfg.replications, RngStream::new(cfg.seed, 0))?;

    let records = (0..cfg.replications)
        .map(|r| Record {
            index: r,
            values: table.rows.iter().map(|row| (format!("m_{}", row.m), row.values[r])).collect::<BTreeMap<_, _>>(),
            error: None,
        })
        .collect();
    let mut out = Outcome { records, ..Outcome::default() };
    out.summary("df_exact", table.df_exact);
    for row in &table.rows {
        out.summary(format!("mean_m_{}", row.m), row.mean);
        out.summary(format!("std_m_{}", row.m), row.std);
        out.summary(format!("mean_se_m_{}", row.m), row.mean_se);
    }

    let last = table.rows.iter().max_by_key(|r| r.m).expect("nonempty grid");
    let rel = (last.mean - table.df_exact).abs() / table.df_exact.abs().max(f64::MIN_POSITIVE);
    out.verdicts.push(Verdict::at_most(
        "df_mean_relative_error",
        rel,
        MEAN_TOLERANCE,
        format!("|mean - df_exact| / df_exact at m = {}, df_exact = {:.6}", last.m, table.df_exact),
    ));
    for row in &table.rows {
        if let Some(quad) = table.row(4 * row.m) {
            out.verdicts.push(Verdict::within(
                &format!("std_ratio_{}_{}", row.m, quad.m),
                row.std / quad.std,
                Some(RATIO_RANGE.0),
                Some(RATIO_RANGE.1),
                format!("std(m = {}) / std(m = {})", row.m, quad.m),
            ));
        }
    }
    Ok(out)
}

/// Ratio of squared error to `4n/m` above which Markov's inequality caps
/// the frequency at `1 / MARKOV_FACTOR`.
const MARKOV_FACTOR: f64 = 10.0;

pub(super) fn mc_div_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let m = cfg.m.unwrap_or(100);
    let n = cfg.n;
    let mut opts = McOptions::new(m);
    opts.a = cfg.mc_step;
    let mut out = Outcome::default();
    match cfg.mc_map.expect("validated") {
        McMapKind::Linear => {
            let a = DMatrix::from_fn(n, n, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
            let exact = a.trace();
            // Var(z^T A z) = ||A||_F^2 + trace(A^2)
            let se = ((a.norm_squared() + (&a * &a).trace()) / m as f64).sqrt();
            let map = LinearMap::new(a)?;
            let reps = replicate(cfg, |_, stream| {
                let y = standard_normal_vector(&mut stream.substream(0).rng(), n);
                mc_divergence(&map, &y, &opts, stream.substream(1)).map(|e| e.value)
            })?;
            out.records = reps.records(|v| vec![("estimate", *v)]);
            let values = reps.column(|v| *v);
            let worst = values.iter().map(|v| (v - exact).abs() / se).fold(0.0, f64::max);
            let pooled = (stats::mean(&values) - exact).abs() / (se / (values.len() as f64).sqrt());
            out.summary("trace", exact);
            out.summary("analytic_se", se);
            out.describe("estimate", &values);
            out.verdicts.push(Verdict::z(
                "linear_estimate_within_4se",
                worst,
                "max over replications of |estimate - trace(A)| / analytic SE",
            ));
            out.verdicts.push(Verdict::z("linear_pooled_mean", pooled, "|mean estimate - trace(A)| / (SE / sqrt(R))"));
        }
        McMapKind::Lasso => {
            let reg = Regression::new(cfg)?;
            let map = LassoMap { x: reg.x.clone(), lambda: reg.lambda };
            let reps = replicate(cfg, |_, stream| {
                let y = reg.response(stream.substream(0));
                let exact = map.divergence(&y).expect("Lasso has an exact divergence")?;
                let est = mc_divergence(&map, &y, &opts, stream.substream(1))?;
                Ok((est.value, exact))
            })?;
            out.records = reps.records(|(v, e)| vec![("estimate", *v), ("df_exact", *e), ("sq_error", (v - e).powi(2))]);
            let sq = reps.column(|(v, e)| (v - e).powi(2));
            let scale = 4.0 * n as f64 / m as f64;
            let s = stats::Summary::of(&sq);
            out.summary("mean_sq_error", s.mean);
            out.summary("four_n_over_m", scale);
            out.verdicts.push(Verdict::at_most(
                "lasso_mse_bound",
                s.mean,
                scale + 4.0 * s.se,
                format!("mean squared error vs 4n/m = {scale:.6} + 4 SE"),
            ));
            let freq = sq.iter().filter(|e| **e > MARKOV_FACTOR * scale).count() as f64 / sq.len().max(1) as f64;
            out.summary("markov_exceedance", freq);
            out.verdicts.push(Verdict::at_most(
                "lasso_markov",
                freq,
                1.0 / MARKOV_FACTOR,
                format!("frequency of squared error above {MARKOV_FACTOR} * 4n/m"),
            ));
            let bias: Vec<f64> = reps.column(|(v, e)| v - e);
            out.summary("bias_z", z_of(&bias));
        }
    }
    Ok(out)
}
