//! Monte Carlo approximation of the divergence of a black-box map.
//!
//! With `h(z) = (f(y + a z) - f(y)) / a` and `z_j` iid `N(0, I_n)`, the average
//! of `z_j^T h(z_j)` estimates `div f(y)` with conditional mean squared error
//! at most `4n / m` when `f` is 1-Lipschitz.

mod maps;
mod table;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

pub use maps::{ElasticNetMap, LassoMap, LinearMap, SvtMap};
pub use table::{df_table_experiment, DfEstimator, DfTable, DfTableRow};

use crate::error::{ensure, Result, SteinError};
use crate::rng::{standard_normal_vector, RngStream};
use crate::stats;

/// Output of one evaluation of a [`VectorMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    pub value: DVector<f64>,
    /// Solver state that can warm-start nearby evaluations.
    pub state: Option<DVector<f64>>,
}

impl MapOutput {
    pub fn plain(value: DVector<f64>) -> Self {
        Self { value, state: None }
    }
}

/// A map `R^n -> R^n`.
pub trait VectorMap: Sync {
    fn dim(&self) -> usize;

    /// `warm` is the state returned at the unperturbed point, if any.
    fn eval(&self, y: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<MapOutput>;

    /// Exact divergence at `y`, when a formula exists.
    fn divergence(&self, _y: &DVector<f64>) -> Option<Result<f64>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOptions {
    pub m: usize,
    /// Perturbation step; `None` selects `1e-4 (1 + ||y|| / sqrt(n))`.
    pub a: Option<f64>,
    /// Use `(f(y + a z) - f(y - a z)) / (2a)`.
    pub two_sided: bool,
    pub warm_start: bool,
    /// Average the exact divergence at the perturbed points as well.
    pub with_dbar: bool,
    /// Also estimate `trace(J^2)` by the off-diagonal U-statistic.
    pub with_trace_sq: bool,
}

impl McOptions {
    pub fn new(m: usize) -> Self {
        Self { m, a: None, two_sided: false, warm_start: true, with_dbar: false, with_trace_sq: false }
    }

    pub fn step(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    /// `m^{-1} sum_j z_j^T h(z_j)`.
    pub value: f64,
    /// `m^{-1} sum_j div f(y + a z_j)`, when requested and available.
    pub dbar: Option<f64>,
    pub m: usize,
    pub a: f64,
    /// `2 sqrt(n / m)`, valid for 1-Lipschitz maps.
    pub se_bound: f64,
    pub empirical_se: f64,
    /// `mean_{i != j} (z_i^T h_j)(z_j^T h_i)`, when requested.
    pub trace_sq: Option<f64>,
}

pub fn default_step(y: &DVector<f64>) -> f64 {
    1e-4 * (1.0 + y.norm() / (y.len() as f64).sqrt())
}

fn tag<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        SteinError::MapFailure { .. } => e,
        other => SteinError::MapFailure { index, message: other.to_string() },
    })
}

/// A probe `z`, the scaled difference `h(z)` and, when requested, the exact
/// divergence at the perturbed point.
pub type Probe = (DVector<f64>, DVector<f64>, Option<f64>);

/// Probe vectors `z_j` and the scaled differences `h(z_j)`.
pub fn perturbations<F: VectorMap + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    opts: &McOptions,
    stream: RngStream,
) -> Result<(f64, Vec<Probe>)> {
    let n = f.dim();
    if y.len() != n {
        return Err(SteinError::DimensionMismatch(format!("map of dimension {n} evaluated at length {}", y.len())));
    }
    ensure(opts.m >= 1, || "m must be positive".into())?;
    let a = opts.a.unwrap_or_else(|| default_step(y));
    ensure(a > 0.0 && a.is_finite(), || format!("step must be positive, got {a}"))?;
    let base = if opts.two_sided { None } else { Some(f.eval(y, None)?) };
    let warm = if opts.warm_start {
        match &base {
            Some(b) => b.state.clone(),
            None => f.eval(y, None)?.state,
        }
    } else {
        None
    };
    let out = (0..opts.m)
        .into_par_iter()
        .map(|j| {
            let z = standard_normal_vector(&mut stream.substream(j as u64).rng(), n);
            let yp = y + &z * a;
            let fp = tag(j, f.eval(&yp, warm.as_ref()))?;
            let h = match &base {
                Some(b) => (fp.value - &b.value) / a,
                None => {
                    let fm = tag(j, f.eval(&(y - &z * a), warm.as_ref()))?;
                    (fp.value - fm.value) / (2.0 * a)
                }
            };
            let d = if opts.with_dbar { f.divergence(&yp).map(|r| tag(j, r)).transpose()? } else { None };
            Ok((z, h, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((a, out))
}

/// Off-diagonal U-statistic for `trace(J^2)` from probes and responses.
pub fn trace_sq_u_statistic(probes: &[(DVector<f64>, DVector<f64>)]) -> Result<f64> {
    let m = probes.len();
    ensure(m >= 2, || "the trace(J^2) estimate needs at least two probes".into())?;
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let (zi, hi) = &probes[i];
            let mut s = 0.0;
            for (j, (zj, hj)) in probes.iter().enumerate() {
                if i != j {
                    s += zi.dot(hj) * zj.dot(hi);
                }
            }
            s
        })
        .collect();
    Ok(stats::pairwise_sum(&rows) / (m * (m - 1)) as f64)
}

pub fn mc_divergence<F: VectorMap + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    opts: &McOptions,
    stream: RngStream,
) -> Result<DivergenceEstimate> {
    let (a, draws) = perturbations(f, y, opts, stream)?;
    let terms: Vec<f64> = draws.iter().map(|(z, h, _)| z.dot(h)).collect();
    let dbar = if opts.with_dbar && draws.iter().all(|d| d.2.is_some()) {
        let ds: Vec<f64> = draws.iter().filter_map(|d| d.2).collect();
        Some(stats::mean(&ds))
    } else {
        None
    };
    let trace_sq = if opts.with_trace_sq {
        let probes: Vec<(DVector<f64>, DVector<f64>)> = draws.into_iter().map(|(z, h, _)| (z, h)).collect();
        Some(trace_sq_u_statistic(&probes)?)
    } else {
        None
    };
    let m = opts.m;
    Ok(DivergenceEstimate {
        value: stats::mean(&terms),
        dbar,
        m,
        a,
        se_bound: 2.0 * (f.dim() as f64 / m as f64).sqrt(),
        empirical_se: if m >= 2 { stats::std_error(&terms) } else { f64::NAN },
        trace_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    struct Constant(DVector<f64>);

    impl VectorMap for Constant {
        fn dim(&self) -> usize {
            self.0.len()
        }

        fn eval(&self, _y: &DVector<f64>, _w: Option<&DVector<f64>>) -> Result<MapOutput> {
            Ok(MapOutput::plain(self.0.clone()))
        }
    }

    #[test]
    fn constant_map_has_zero_divergence() {
        let f = Constant(DVector::from_vec(vec![1.0, -2.0, 3.0]));
        let est = mc_divergence(&f, &DVector::zeros(3), &McOptions::new(7), RngStream::new(1, 0)).unwrap();
        assert_eq!(est.value, 0.0);
        assert!((est.se_bound - 2.0 * (3.0f64 / 7.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linear_map_trace_and_trace_sq() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 2.0, 1.0, -1.0, 0.0, 3.0]);
        let f = LinearMap::new(a.clone()).unwrap();
        let mut opts = McOptions::new(4000).step(1.0);
        opts.with_trace_sq = true;
        opts.with_dbar = true;
        let est = mc_divergence(&f, &DVector::zeros(3), &opts, RngStream::new(9, 0)).unwrap();
        let sd = ((a.norm_squared() + (&a * &a).trace()) / 4000.0).sqrt();
        assert!((est.value - 6.0).abs() < 4.0 * sd, "{}", est.value);
        assert_eq!(est.dbar, Some(6.0));
        let t = (&a * &a).trace();
        assert!((est.trace_sq.unwrap() - t).abs() < 1.5, "{:?} vs {t}", est.trace_sq);
    }

    #[test]
    fn deterministic_given_stream() {
        let f = LinearMap::new(DMatrix::identity(4, 4)).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let a = mc_divergence(&f, &y, &McOptions::new(50), RngStream::new(3, 2)).unwrap();
        let b = mc_divergence(&f, &y, &McOptions::new(50), RngStream::new(3, 2)).unwrap();
        assert_eq!(a, b);
    }
}
