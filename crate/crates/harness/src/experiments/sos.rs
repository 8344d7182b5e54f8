use nalgebra::DVector;
use stein_core::rng::{iid_gaussian_matrix, standard_normal_vector};
use stein_core::stein::fields::{
    ConstantField, ElasticNetResidualField, IdentityField, LassoResidualField, LinearField, SoftThresholdField,
};
use stein_core::stein::{sos_draw, IdentityReport, VectorField};

use super::{design_stream, replicate, Outcome, Regression};
use crate::config::{ExperimentConfig, FieldKind};
use crate::error::{HarnessError, Result};
use crate::results::Verdict;

fn constant_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| (i + 1) as f64 / n as f64)
}

fn build_field(cfg: &ExperimentConfig, kind: FieldKind) -> Result<Box<dyn VectorField>> {
    let n = cfg.n;
    Ok(match kind {
        FieldKind::Identity => Box::new(IdentityField { n }),
        FieldKind::Constant => Box::new(ConstantField { c: constant_vector(n) }),
        FieldKind::Linear => {
            let a = iid_gaussian_matrix(&mut design_stream(cfg).rng(), n, n) / (n as f64).sqrt();
            Box::new(LinearField::new(a)?)
        }
        FieldKind::SoftThreshold => Box::new(SoftThresholdField { n, t: cfg.lambda.unwrap_or(1.0) }),
        FieldKind::LassoResidual => {
            let r = Regression::new(cfg)?;
            Box::new(LassoResidualField { x: r.x, mean: r.mean, lambda: r.lambda })
        }
        FieldKind::ElasticNetResidual => {
            let r = Regression::new(cfg)?;
            let gamma = r.gamma.ok_or_else(|| HarnessError::Config("elastic_net_residual needs gamma_en".into()))?;
            Box::new(ElasticNetResidualField { x: r.x, mean: r.mean, lambda: r.lambda, gamma })
        }
    })
}

pub(super) fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let kind = cfg.field.expect("validated");
    let field = build_field(cfg, kind)?;
    let (n, sigma) = (cfg.n, cfg.sigma);
    let reps = replicate(cfg, |_, stream| {
        let z = standard_normal_vector(&mut stream.rng(), n) * sigma;
        sos_draw(field.as_ref(), &z, sigma)
    })?;
    let lhs = reps.column(|p| p.0);
    let rhs = reps.column(|p| p.1);
    let report = IdentityReport::from_pairs(&lhs, &rhs);

    let mut out = Outcome { records: reps.records(|p| vec![("lhs", p.0), ("rhs", p.1)]), ..Outcome::default() };
    out.summary("lhs_mean", report.lhs_mean);
    out.summary("rhs_mean", report.rhs_mean);
    out.summary("lhs_se", report.lhs_se);
    out.summary("rhs_se", report.rhs_se);
    out.summary("z_score", report.z_score);
    out.verdicts.push(Verdict::z("sos_identity", report.z_score, "|mean(lhs - rhs)| / SE"));

    let s4 = sigma.powi(4);
    match kind {
        FieldKind::Identity => {
            let pop = 2.0 * n as f64 * s4;
            out.verdicts.push(Verdict::z(
                "identity_lhs_population",
                (report.lhs_mean - pop).abs() / report.lhs_se,
                format!("population value 2 n sigma^4 = {pop}"),
            ));
            out.verdicts.push(Verdict::z(
                "identity_rhs_population",
                (report.rhs_mean - pop).abs() / report.rhs_se,
                format!("population value 2 n sigma^4 = {pop}"),
            ));
        }
        FieldKind::Constant => {
            let pop = sigma * sigma * constant_vector(n).norm_squared();
            let worst = rhs.iter().map(|r| (r - pop).abs()).fold(0.0, f64::max);
            out.verdicts.push(Verdict::at_most(
                "constant_rhs_exact",
                worst,
                1e-12 * pop.max(1.0),
                format!("per-draw deviation from sigma^2 ||c||^2 = {pop}"),
            ));
            out.verdicts.push(Verdict::z(
                "constant_lhs_population",
                (report.lhs_mean - pop).abs() / report.lhs_se,
                format!("population value sigma^2 ||c||^2 = {pop}"),
            ));
        }
        _ => {}
    }
    Ok(out)
}

