use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::io::Table;

pub const SCHEMA: &str = "stein-sure/1";

/// Outcome of one replication. Failed replications keep their slot with the
/// error message and no values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub index: usize,
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Pass or fail of one named invariant, with the achieved statistic and the
/// bounds it was held to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub invariant: String,
    pub passed: bool,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub fn within(invariant: &str, statistic: f64, lower: Option<f64>, upper: Option<f64>, detail: impl Into<String>) -> Self {
        let passed = lower.is_none_or(|l| statistic >= l) && upper.is_none_or(|u| statistic <= u);
        Self { invariant: invariant.into(), passed, statistic, lower, upper, detail: detail.into() }
    }

    pub fn at_most(invariant: &str, statistic: f64, upper: f64, detail: impl Into<String>) -> Self {
        Self::within(invariant, statistic, None, Some(upper), detail)
    }

    pub fn at_least(invariant: &str, statistic: f64, lower: f64, detail: impl Into<String>) -> Self {
        Self::within(invariant, statistic, Some(lower), None, detail)
    }

    /// Passes when the z-score is at most 4.
    pub fn z(invariant: &str, z: f64, detail: impl Into<String>) -> Self {
        Self::at_most(invariant, z, Z_THRESHOLD, detail)
    }

    /// One line: name, outcome, statistic and bounds.
    pub fn line(&self) -> String {
        let bound = match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("in [{l:.6}, {u:.6}]"),
            (Some(l), None) => format!(">= {l:.6}"),
            (None, Some(u)) => format!("<= {u:.6}"),
            (None, None) => String::new(),
        };
        let outcome = if self.passed { "PASS" } else { "FAIL" };
        format!("{outcome} {}: {:.6} {bound} ({})", self.invariant, self.statistic, self.detail)
    }
}

/// Monte Carlo acceptance threshold, in standard errors.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    pub schema: String,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub summaries: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub failed_replications: usize,
    /// Only set on request, so that repeated runs serialize identically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl ResultSet {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, invariant: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.invariant == invariant)
    }

    pub fn summary(&self, key: &str) -> Option<f64> {
        self.summaries.get(key).copied()
    }

    /// Values of `key` over successful replications, in index order.
    pub fn column(&self, key: &str) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.values.get(key).copied()).collect()
    }

    /// Records as a table: `index` followed by every value key, sorted;
    /// missing values are NaN.
    pub fn records_table(&self) -> Table {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.records {
            for k in r.values.keys() {
                if !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
        keys.sort();
        let rows = self
            .records
            .iter()
            .map(|r| {
                std::iter::once(r.index as f64)
                    .chain(keys.iter().map(|k| r.values.get(k).copied().unwrap_or(f64::NAN)))
                    .collect()
            })
            .collect();
        let mut columns = vec!["index".to_string()];
        columns.extend(keys);
        Table { columns, rows }
    }
}
