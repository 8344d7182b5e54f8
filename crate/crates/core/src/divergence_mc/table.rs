use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{mc_divergence, ElasticNetMap, McOptions, SvtMap, VectorMap};
use crate::error::{ensure, Result};
use crate::problem::{spiked_beta, Design};
use crate::rng::{iid_gaussian_matrix, standard_normal_vector, RngStream};
use crate::stats::Summary;

/// Estimators with an exact degrees-of-freedom formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DfEstimator {
    /// `Y = noise + A B^T` with iid standard normal `A` (`rows x rank`),
    /// `B` (`cols x rank`) and noise.
    Svt { rows: usize, cols: usize, rank: usize, lambda: f64, a: f64 },
    /// Rademacher design, `beta` with `s0` leading entries equal to
    /// `amplitude`, unit noise. Penalties are `lambda` and `gamma` in the
    /// crate convention.
    ElasticNet { n: usize, p: usize, s0: usize, amplitude: f64, lambda: f64, gamma: f64, a: f64 },
}

impl DfEstimator {
    /// `n = 100`, `q = 101`, `lambda = 10`, rank-10 signal, `a = 1e-4`.
    pub fn reference_svt() -> Self {
        DfEstimator::Svt { rows: 101, cols: 100, rank: 10, lambda: 10.0, a: 1e-4 }
    }

    /// `n = 500`, `p = 400`, `lambda = 0.8 sqrt(4 log p / n)` and an `l2`
    /// weight of `0.2 sqrt(4 log p / n)` per observation, `a = 1e-3`.
    pub fn reference_elastic_net() -> Self {
        let (n, p) = (500usize, 400usize);
        let base = (4.0 * (p as f64).ln() / n as f64).sqrt();
        DfEstimator::ElasticNet { n, p, s0: 20, amplitude: 1.0, lambda: 0.8 * base, gamma: n as f64 * 0.2 * base, a: 1e-3 }
    }

    fn step(&self) -> f64 {
        match *self {
            DfEstimator::Svt { a, .. } | DfEstimator::ElasticNet { a, .. } => a,
        }
    }

    /// The map and the data point for one realization.
    fn realize(&self, stream: RngStream) -> Result<(Box<dyn VectorMap>, DVector<f64>)> {
        match *self {
            DfEstimator::Svt { rows, cols, rank, lambda, .. } => {
                ensure(rows >= 1 && cols >= 1 && rank >= 1, || "SVT dimensions must be positive".into())?;
                let mut r = stream.rng();
                let a = iid_gaussian_matrix(&mut r, rows, rank);
                let b = iid_gaussian_matrix(&mut r, cols, rank);
                let noise = iid_gaussian_matrix(&mut r, rows, cols);
                let y = noise + a * b.transpose();
                Ok((Box::new(SvtMap { rows, cols, lambda }), DVector::from_column_slice(y.as_slice())))
            }
            DfEstimator::ElasticNet { n, p, s0, amplitude, lambda, gamma, .. } => {
                let x = Design::Rademacher.build(n, p, stream.substream(0))?;
                let beta = spiked_beta(p, s0, amplitude)?;
                let y = &x * beta + standard_normal_vector(&mut stream.substream(1).rng(), n);
                Ok((Box::new(ElasticNetMap { x, lambda, gamma }), y))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfTableRow {
    pub m: usize,
    pub mean: f64,
    pub std: f64,
    pub mean_se: f64,
    pub n_real: usize,
    /// One estimate per perturbation set.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfTable {
    pub estimator: DfEstimator,
    pub df_exact: f64,
    pub rows: Vec<DfTableRow>,
}

impl DfTable {
    pub fn row(&self, m: usize) -> Option<&DfTableRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

/// For each `m`, the mean and standard deviation of the Monte Carlo
/// divergence over `n_real` independent perturbation sets at one fixed data
/// realization.
pub fn df_table_experiment(
    estimator: &DfEstimator,
    m_grid: &[usize],
    n_real: usize,
    stream: RngStream,
) -> Result<DfTable> {
    ensure(n_real >= 2, || "at least two perturbation sets are required".into())?;
    ensure(!m_grid.is_empty() && m_grid.iter().all(|&m| m >= 1), || "m grid must be nonempty and positive".into())?;
    let (map, y) = estimator.realize(stream.substream(0))?;
    let df_exact = map.divergence(&y).expect("table estimators have exact divergence")?;
    let opts = McOptions::new(1).step(estimator.step());
    let mut rows = Vec::with_capacity(m_grid.len());
    for (g, &m) in m_grid.iter().enumerate() {
        let grid_stream = stream.substream(1 + g as u64);
        let opts = McOptions { m, ..opts.clone() };
        let values = (0..n_real)
            .map(|r| mc_divergence(map.as_ref(), &y, &opts, grid_stream.substream(r as u64)).map(|e| e.value))
            .collect::<Result<Vec<f64>>>()?;
        let s = Summary::of(&values);
        rows.push(DfTableRow { m, mean: s.mean, std: s.sd, mean_se: s.se, n_real, values });
    }
    Ok(DfTable { estimator: estimator.clone(), df_exact, rows })
}
