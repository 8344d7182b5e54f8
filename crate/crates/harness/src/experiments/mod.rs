//! Experiment orchestration. Replication `i` draws from `RngStream(seed, i)`;
//! fixed designs and auxiliary matrices come from the reserved stream
//! [`DESIGN_STREAM`].

mod debias;
mod divergence;
mod regression;
mod selection;
mod sos;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use stein_core::rng::{standard_normal_vector, RngStream};
use stein_core::solvers::{elastic_net, lasso, FitResult, SolverOptions};
use stein_core::stats;

use crate::config::{BetaSpec, ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::io::load_vector_csv;
use crate::results::{Record, ResultSet, Verdict, SCHEMA};

pub const DESIGN_STREAM: u64 = u64::MAX;

/// Runs `cfg` to completion; a pure function of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultSet> {
    cfg.validate()?;
    let out = match cfg.kind {
        ExperimentKind::SosVerify => sos::run(cfg)?,
        ExperimentKind::SureUnbiased => regression::sure_unbiased(cfg)?,
        ExperimentKind::Sure4sureConsistency => regression::consistency(cfg)?,
        ExperimentKind::Coverage => regression::coverage(cfg)?,
        ExperimentKind::ModelSize => regression::model_size(cfg)?,
        ExperimentKind::DfTable => divergence::df_table(cfg)?,
        ExperimentKind::McDivCheck => divergence::mc_div_check(cfg)?,
        ExperimentKind::TuneOracle => selection::run(cfg)?,
        ExperimentKind::DebiasPivot => debias::run(cfg)?,
    };
    debug_assert_eq!(out.records.len(), cfg.replications);
    Ok(ResultSet {
        schema: SCHEMA.to_string(),
        config: cfg.clone(),
        failed_replications: out.records.iter().filter(|r| r.error.is_some()).count(),
        records: out.records,
        summaries: out.summaries,
        verdicts: out.verdicts,
        wall_clock_secs: None,
    })
}

#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub records: Vec<Record>,
    pub summaries: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

impl Outcome {
    fn summary(&mut self, key: impl Into<String>, value: f64) {
        self.summaries.insert(key.into(), value);
    }

    /// Mean, SD and SE of `values` under `key_mean`, `key_sd`, `key_se`.
    fn describe(&mut self, key: &str, values: &[f64]) {
        let s = stats::Summary::of(values);
        self.summary(format!("{key}_mean"), s.mean);
        self.summary(format!("{key}_sd"), s.sd);
        self.summary(format!("{key}_se"), s.se);
    }
}

/// Per-replication results in index order.
pub(crate) struct Replicated<T> {
    results: Vec<std::result::Result<T, String>>,
}

impl<T> Replicated<T> {
    pub fn ok(&self) -> Vec<&T> {
        self.results.iter().filter_map(|r| r.as_ref().ok()).collect()
    }

    pub fn column(&self, f: impl Fn(&T) -> f64) -> Vec<f64> {
        self.ok().into_iter().map(f).collect()
    }

    pub fn records(&self, f: impl Fn(&T) -> Vec<(&'static str, f64)>) -> Vec<Record> {
        self.results
            .iter()
            .enumerate()
            .map(|(index, r)| match r {
                Ok(v) => Record {
                    index,
                    values: f(v).into_iter().map(|(k, x)| (k.to_string(), x)).collect(),
                    error: None,
                },
                Err(e) => Record { index, values: BTreeMap::new(), error: Some(e.clone()) },
            })
            .collect()
    }
}

/// Runs `f(i, RngStream(seed, i))` for every replication. More than 1%
/// failures abort the experiment.
pub(crate) fn replicate<T: Send>(
    cfg: &ExperimentConfig,
    f: impl Fn(usize, RngStream) -> stein_core::Result<T> + Sync + Send,
) -> Result<Replicated<T>> {
    let results: Vec<std::result::Result<T, String>> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| f(i, RngStream::new(cfg.seed, i as u64)).map_err(|e| e.to_string()))
        .collect();
    let failed: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    if failed.len() * 100 > cfg.replications {
        return Err(HarnessError::TooManyFailures {
            failed: failed.len(),
            total: cfg.replications,
            first: failed[0].clone(),
        });
    }
    Ok(Replicated { results })
}

pub(crate) fn design_stream(cfg: &ExperimentConfig) -> RngStream {
    RngStream::new(cfg.seed, DESIGN_STREAM)
}

pub(crate) fn build_beta(cfg: &ExperimentConfig) -> Result<DVector<f64>> {
    match &cfg.beta_spec {
        BetaSpec::Zeros => Ok(DVector::zeros(cfg.p)),
        BetaSpec::Spiked { amplitude } => Ok(stein_core::problem::spiked_beta(cfg.p, cfg.s0, *amplitude)?),
        BetaSpec::Custom { path } => {
            let b = load_vector_csv(path)?;
            if b.len() != cfg.p {
                return Err(HarnessError::Config(format!("custom beta has length {} but p={}", b.len(), cfg.p)));
            }
            Ok(b)
        }
    }
}

/// `sigma sqrt(2 log p / n)`, or the restricted-eigenvalue choice.
pub(crate) fn default_lambda(cfg: &ExperimentConfig) -> f64 {
    if let Some(l) = cfg.lambda {
        return l;
    }
    if let Some((tau, gamma)) = cfg.re_tuning {
        return stein_core::stein::lambda_re(cfg.sigma, cfg.n, cfg.p, cfg.s0, tau, gamma);
    }
    cfg.sigma * (2.0 * (cfg.p.max(2) as f64).ln() / cfg.n as f64).sqrt()
}

/// Fixed design, truth and penalty of a regression experiment.
pub(crate) struct Regression {
    pub x: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub mean: DVector<f64>,
    pub lambda: f64,
    /// Ridge weight in the solver convention `gamma ||b||^2 / (2n)`.
    pub gamma: Option<f64>,
    pub sigma: f64,
}

impl Regression {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let x = cfg.design.build(cfg.n, cfg.p, design_stream(cfg))?;
        let beta = build_beta(cfg)?;
        Ok(Self::with_design(cfg, x, beta))
    }

    pub fn with_design(cfg: &ExperimentConfig, x: DMatrix<f64>, beta: DVector<f64>) -> Self {
        let mean = &x * &beta;
        Self {
            x,
            beta,
            mean,
            lambda: default_lambda(cfg),
            gamma: cfg.gamma_en.map(|g| g * cfg.n as f64),
            sigma: cfg.sigma,
        }
    }

    pub fn response(&self, stream: RngStream) -> DVector<f64> {
        &self.mean + standard_normal_vector(&mut stream.rng(), self.mean.len()) * self.sigma
    }

    pub fn fit(&self, y: &DVector<f64>) -> stein_core::Result<FitResult> {
        let opts = SolverOptions::default();
        match self.gamma {
            Some(g) => elastic_net(&self.x, y, self.lambda, g, &opts),
            None => lasso(&self.x, y, self.lambda, &opts),
        }
    }
}

/// `|mean(d)| / SE(d)`.
pub(crate) fn z_of(d: &[f64]) -> f64 {
    stats::paired_z(d)
}
