//! Core matrix types: the standardized design, the multi-task response and
//! coefficient matrices.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// The n×p design (gain) matrix, column-wise standardized.
///
/// After standardization every column has mean 0 and empirical variance 1,
/// so the empirical covariance `Σ̂ = XᵀX/n` has a unit diagonal.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: Array2<f64>,
    /// Per-column centers removed during standardization.
    means: Vec<f64>,
    /// Per-column scale factors divided out during standardization.
    scales: Vec<f64>,
    standardized: bool,
}

impl DesignMatrix {
    /// Center and scale the columns of a raw matrix to unit empirical
    /// variance (`diag(XᵀX/n) = 1`).
    pub fn standardize(raw: Array2<f64>) -> Result<Self> {
        let (n, p) = raw.dim();
        if n < 2 || p < 1 {
            return Err(Error::ShapeMismatch(format!(
                "design matrix must be at least 2×1, got {n}×{p}"
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        let mut data = raw;
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for j in 0..p {
            let mut col = data.column_mut(j);
            let mean = col.sum() / n as f64;
            col.mapv_inplace(|v| v - mean);
            let scale = (col.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            if scale == 0.0 {
                return Err(Error::ConstantColumn(j));
            }
            col.mapv_inplace(|v| v / scale);
            means.push(mean);
            scales.push(scale);
        }
        Ok(Self { data, means, scales, standardized: true })
    }

    /// Wrap a matrix that is already standardized, verifying the unit
    /// variance invariant within `1e-10`.
    pub fn from_standardized(data: Array2<f64>) -> Result<Self> {
        let (n, p) = data.dim();
        if n < 2 || p < 1 {
            return Err(Error::ShapeMismatch(format!(
                "design matrix must be at least 2×1, got {n}×{p}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        for j in 0..p {
            let var = data.column(j).iter().map(|v| v * v).sum::<f64>() / n as f64;
            if (var - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParam(format!(
                    "column {j} has empirical variance {var}, expected 1"
                )));
            }
        }
        Ok(Self {
            data,
            means: vec![0.0; p],
            scales: vec![1.0; p],
            standardized: true,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Column centers removed by [`standardize`](Self::standardize).
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Column scale factors divided out by [`standardize`](Self::standardize).
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Empirical covariance `Σ̂ = XᵀX/n`, computed on demand.
    pub fn empirical_covariance(&self) -> Array2<f64> {
        let n = self.n() as f64;
        self.data.t().dot(&self.data) / n
    }
}

/// The n×T observation matrix, one column per task (time step).
#[derive(Debug, Clone)]
pub struct MultiResponse {
    data: Array2<f64>,
}

impl MultiResponse {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.ncols() < 1 {
            return Err(Error::ShapeMismatch("response must have T ≥ 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response matrix"));
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn t(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }
}

/// A p×T coefficient matrix with row-sparse structure.
#[derive(Debug, Clone)]
pub struct CoefMatrix {
    data: Array2<f64>,
}

impl CoefMatrix {
    pub fn new(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(p: usize, t: usize) -> Self {
        Self { data: Array2::zeros((p, t)) }
    }

    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    pub fn t(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Row support `{j : B_{j,·} ≠ 0}`, recomputed on every call so it can
    /// never go stale.
    pub fn support(&self) -> Vec<usize> {
        (0..self.data.nrows())
            .filter(|&j| self.data.row(j).iter().any(|&v| v != 0.0))
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.support().len()
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.data.nrows())
            .map(|j| self.data.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standardize_fixed_point() {
        let x = array![[1.0], [-1.0]];
        let d = DesignMatrix::standardize(x).unwrap();
        assert!((d.data()[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((d.data()[[1, 0]] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_pure_scaling() {
        let x = array![[2.0], [-2.0]];
        let d = DesignMatrix::standardize(x).unwrap();
        assert!((d.data()[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((d.data()[[1, 0]] + 1.0).abs() < 1e-15);
        assert!((d.scales()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_unit_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((5, 3), |_| rng.random::<f64>() * 4.0 - 2.0);
        let d = DesignMatrix::standardize(x).unwrap();
        let cov = d.empirical_covariance();
        for j in 0..3 {
            assert!((cov[[j, j]] - 1.0).abs() < 1e-10, "diag {} = {}", j, cov[[j, j]]);
        }
        // columns are centered
        for j in 0..3 {
            assert!(d.column(j).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((20, 6), |_| rng.random::<f64>() * 3.0);
        let once = DesignMatrix::standardize(x).unwrap();
        let twice = DesignMatrix::standardize(once.data().clone()).unwrap();
        for (a, b) in once.data().iter().zip(twice.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let x = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        match DesignMatrix::standardize(x) {
            Err(Error::ConstantColumn(1)) => {}
            other => panic!("expected ConstantColumn(1), got {other:?}"),
        }
    }

    #[test]
    fn standardize_rejects_non_finite() {
        let x = array![[1.0, f64::NAN], [2.0, 5.0]];
        assert!(matches!(DesignMatrix::standardize(x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn support_is_recomputed_exactly() {
        let mut b = CoefMatrix::zeros(4, 2);
        assert!(b.support().is_empty());
        b.data = array![[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, -2.0]];
        assert_eq!(b.support(), vec![1, 3]);
        assert_eq!(b.support_size(), 2);
    }

    #[test]
    fn response_requires_tasks() {
        let y = Array2::<f64>::zeros((4, 0));
        assert!(MultiResponse::new(y).is_err());
    }
}
