use nalgebra::{DMatrix, DVector};

use super::{MapOutput, VectorMap};
use crate::error::{ensure, Result, SteinError};
use crate::solvers::{elastic_net, lasso, svt, SolverOptions};

fn check_len(y: &DVector<f64>, n: usize) -> Result<()> {
    if y.len() != n {
        return Err(SteinError::DimensionMismatch(format!("map of dimension {n} evaluated at length {}", y.len())));
    }
    Ok(())
}

/// `y -> A y`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub a: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        ensure(a.is_square() && a.nrows() > 0, || "linear map needs a nonempty square matrix".into())?;
        Ok(Self { a })
    }
}

impl VectorMap for LinearMap {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, y: &DVector<f64>, _warm: Option<&DVector<f64>>) -> Result<MapOutput> {
        check_len(y, self.dim())?;
        Ok(MapOutput::plain(&self.a * y))
    }

    fn divergence(&self, _y: &DVector<f64>) -> Option<Result<f64>> {
        Some(Ok(self.a.trace()))
    }
}

/// `y -> X beta_hat(y)` for the Lasso; the state is `beta_hat`.
#[derive(Debug, Clone)]
pub struct LassoMap {
    pub x: DMatrix<f64>,
    pub lambda: f64,
}

impl VectorMap for LassoMap {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn eval(&self, y: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<MapOutput> {
        check_len(y, self.dim())?;
        let opts = SolverOptions { warm_start: warm.cloned(), ..SolverOptions::default() };
        let fit = lasso(&self.x, y, self.lambda, &opts)?;
        Ok(MapOutput { value: fit.mu_hat, state: Some(fit.beta_hat) })
    }

    fn divergence(&self, y: &DVector<f64>) -> Option<Result<f64>> {
        Some(lasso(&self.x, y, self.lambda, &SolverOptions::default()).map(|f| f.df_hat))
    }
}

/// `y -> X beta_hat(y)` for the Elastic-Net; the state is `beta_hat`.
#[derive(Debug, Clone)]
pub struct ElasticNetMap {
    pub x: DMatrix<f64>,
    pub lambda: f64,
    pub gamma: f64,
}

impl VectorMap for ElasticNetMap {
    fn dim(&self) -> usize {
        self.x.nrows()
    }

    fn eval(&self, y: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<MapOutput> {
        check_len(y, self.dim())?;
        let opts = SolverOptions { warm_start: warm.cloned(), ..SolverOptions::default() };
        let fit = elastic_net(&self.x, y, self.lambda, self.gamma, &opts)?;
        Ok(MapOutput { value: fit.mu_hat, state: Some(fit.beta_hat) })
    }

    fn divergence(&self, y: &DVector<f64>) -> Option<Result<f64>> {
        Some(elastic_net(&self.x, y, self.lambda, self.gamma, &SolverOptions::default()).map(|f| f.df_hat))
    }
}

/// Singular-value soft-thresholding of a `rows x cols` matrix, acting on its
/// column-major vectorization.
#[derive(Debug, Clone)]
pub struct SvtMap {
    pub rows: usize,
    pub cols: usize,
    pub lambda: f64,
}

impl SvtMap {
    fn matrix(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(y, self.rows * self.cols)?;
        Ok(DMatrix::from_column_slice(self.rows, self.cols, y.as_slice()))
    }
}

impl VectorMap for SvtMap {
    fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn eval(&self, y: &DVector<f64>, _warm: Option<&DVector<f64>>) -> Result<MapOutput> {
        let r = svt(&self.matrix(y)?, self.lambda)?;
        Ok(MapOutput::plain(DVector::from_column_slice(r.matrix.as_slice())))
    }

    fn divergence(&self, y: &DVector<f64>) -> Option<Result<f64>> {
        Some(self.matrix(y).and_then(|m| svt(&m, self.lambda)).map(|r| r.df_exact))
    }
}
