//! Experiment configuration, loaded from JSON.
//!
//! Penalties follow the normalization `||X b - y||^2 / (2n) + lambda ||b||_1
//! + gamma_en ||b||^2 / 2`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stein_core::divergence_mc::DfEstimator;
use stein_core::problem::Design;

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SosVerify,
    SureUnbiased,
    Sure4sureConsistency,
    Coverage,
    ModelSize,
    DfTable,
    TuneOracle,
    DebiasPivot,
    McDivCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BetaSpec {
    Zeros,
    /// The first `s0` coefficients equal `amplitude`.
    Spiked { amplitude: f64 },
    /// A row or column CSV of length `p`.
    Custom { path: PathBuf },
}

/// Fields for `sos_verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Identity,
    /// `c_i = (i + 1) / n`.
    Constant,
    /// `A` with iid `N(0, 1/n)` entries drawn from the design stream.
    Linear,
    /// Threshold `lambda`, default 1.
    SoftThreshold,
    LassoResidual,
    ElasticNetResidual,
}

impl FieldKind {
    pub const ALL: [FieldKind; 6] = [
        FieldKind::Identity,
        FieldKind::Constant,
        FieldKind::Linear,
        FieldKind::SoftThreshold,
        FieldKind::LassoResidual,
        FieldKind::ElasticNetResidual,
    ];
}

/// Candidate family for `tune_oracle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TuneSpec {
    /// `m` Lassos at `lambda * ratio^k`, `k = 0..m`.
    LassoGrid { m: usize, ratio: f64 },
    /// The zero estimator against the triangle-wave estimator in the
    /// sequence model of dimension `n`. Success is a gap of at least
    /// `c sigma n^{1/4}`.
    Adversarial { c: f64, period_exponent: i32 },
}

/// Map for `mc_div_check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMapKind {
    /// `A = diag(1, ..., n)`.
    Linear,
    Lasso,
}

fn one() -> f64 {
    1.0
}

fn five_percent() -> f64 {
    0.05
}

fn default_design() -> Design {
    Design::IidGaussian
}

fn default_beta() -> BetaSpec {
    BetaSpec::Spiked { amplitude: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub s0: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Defaults to `sigma sqrt(2 log p / n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Ridge weight; when set, regressions use the Elastic-Net.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_en: Option<f64>,
    #[serde(default = "five_percent")]
    pub alpha: f64,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_design")]
    pub design: Design,
    #[serde(default = "default_beta")]
    pub beta_spec: BetaSpec,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldKind>,
    /// Monte Carlo probes per divergence estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Perturbation step; defaults per map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_map: Option<McMapKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<DfEstimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneSpec>,
    /// `(tau, gamma)` for the restricted-eigenvalue tuning; selects
    /// `lambda = sigma (1 + tau)(1 + gamma) sqrt((2/n) log(e p / s0))` when
    /// `lambda` is unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_tuning: Option<(f64, f64)>,
    /// `(beta1, beta2)` for the data-driven confidence region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_driven: Option<(f64, f64)>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// A configuration with every optional field unset.
    pub fn new(kind: ExperimentKind, n: usize, p: usize, s0: usize, replications: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            p,
            s0,
            sigma: 1.0,
            lambda: None,
            gamma_en: None,
            alpha: 0.05,
            replications,
            seed,
            design: Design::IidGaussian,
            beta_spec: default_beta(),
            field: None,
            m: None,
            mc_step: None,
            mc_map: None,
            estimator: None,
            m_grid: None,
            tune: None,
            re_tuning: None,
            data_driven: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Whether the kind fits a regression `y = X beta + eps`.
    pub fn uses_regression(&self) -> bool {
        match self.kind {
            ExperimentKind::SureUnbiased
            | ExperimentKind::Sure4sureConsistency
            | ExperimentKind::Coverage
            | ExperimentKind::ModelSize
            | ExperimentKind::DebiasPivot => true,
            ExperimentKind::TuneOracle => !matches!(self.tune, Some(TuneSpec::Adversarial { .. })),
            ExperimentKind::McDivCheck => self.mc_map == Some(McMapKind::Lasso),
            ExperimentKind::SosVerify => {
                matches!(self.field, Some(FieldKind::LassoResidual | FieldKind::ElasticNetResidual))
            }
            ExperimentKind::DfTable => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(bad("replications must be at least 1"));
        }
        if self.n < 1 {
            return Err(bad("n must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(bad(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(bad(format!("lambda must be nonnegative, got {l}")));
            }
        }
        if let Some(g) = self.gamma_en {
            if !(g > 0.0 && g.is_finite()) {
                return Err(bad(format!("gamma_en must be positive, got {g}")));
            }
        }
        if self.uses_regression() {
            if self.p < 1 {
                return Err(bad("p must be positive for regression experiments"));
            }
            if self.s0 > self.p {
                return Err(bad(format!("s0={} exceeds p={}", self.s0, self.p)));
            }
            match (&self.design, self.kind) {
                (Design::Orthonormal, ExperimentKind::DebiasPivot) => {
                    return Err(bad("the de-biasing experiment needs a random design"));
                }
                (Design::Orthonormal, _) if self.p > self.n => {
                    return Err(bad(format!("orthonormal design needs p <= n, got n={}, p={}", self.n, self.p)));
                }
                (Design::Equicorrelated { rho }, _) if !(*rho > -1.0 / (self.p as f64 - 1.0).max(1.0) && *rho < 1.0) => {
                    return Err(bad(format!("equicorrelation rho={rho} is not positive definite")));
                }
                _ => {}
            }
            match &self.beta_spec {
                BetaSpec::Zeros if self.s0 != 0 => {
                    return Err(bad("beta_spec zeros requires s0 = 0"));
                }
                BetaSpec::Spiked { amplitude } if !amplitude.is_finite() => {
                    return Err(bad("spike amplitude must be finite"));
                }
                _ => {}
            }
        }
        if let Some((tau, gamma)) = self.re_tuning {
            if !(tau > 0.0 && gamma >= 0.0) {
                return Err(bad("re_tuning needs tau > 0 and gamma >= 0"));
            }
        }
        if let Some((b1, b2)) = self.data_driven {
            if !(b1 > 0.0 && b2 > 0.0 && self.alpha + b1 + b2 < 1.0) {
                return Err(bad("data_driven levels must be positive with alpha + beta1 + beta2 < 1"));
            }
        }
        if let Some(m) = self.m {
            if m < 2 {
                return Err(bad("m must be at least 2"));
            }
        }
        match self.kind {
            ExperimentKind::SosVerify => {
                if self.field.is_none() {
                    return Err(bad("sos_verify needs a field"));
                }
            }
            ExperimentKind::DfTable => {
                if self.estimator.is_none() {
                    return Err(bad("df_table needs an estimator"));
                }
                match &self.m_grid {
                    Some(g) if !g.is_empty() && g.iter().all(|&m| m >= 1) => {}
                    _ => return Err(bad("df_table needs a nonempty m_grid of positive sizes")),
                }
                if self.replications < 2 {
                    return Err(bad("df_table needs at least two replications"));
                }
            }
            ExperimentKind::TuneOracle => match &self.tune {
                Some(TuneSpec::LassoGrid { m, ratio }) if *m >= 2 && *ratio > 0.0 && *ratio != 1.0 => {}
                Some(TuneSpec::Adversarial { c, .. }) if *c >= 0.0 => {}
                _ => return Err(bad("tune_oracle needs a valid tune spec")),
            },
            ExperimentKind::McDivCheck if self.mc_map.is_none() => return Err(bad("mc_div_check needs mc_map")),
            _ => {}
        }
        Ok(())
    }
}
