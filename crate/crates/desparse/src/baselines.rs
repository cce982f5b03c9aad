//! ℓ₂-regularized reference methods: the ridge (minimum-norm) kernel and the
//! noise-normalized dSPM and sLORETA statistic maps.
//!
//! These treat each time instant independently. Neither map is statistically
//! calibrated; they are the classical baselines the debiased estimators are
//! compared against.

use ndarray::Array2;

use crate::design::{DesignMatrix, MultiResponse};
use crate::error::{Error, Result};
use crate::toeplitz::Cholesky;

/// The p×n ridge kernel `K = Xᵀ(XXᵀ + λI)⁻¹`.
#[derive(Debug, Clone)]
pub struct RidgeKernel {
    k: Array2<f64>,
    lambda: f64,
}

impl RidgeKernel {
    pub fn k(&self) -> &Array2<f64> {
        &self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Ridge coefficient estimate `B̂ = K Y`.
    pub fn estimate(&self, y: &MultiResponse) -> Array2<f64> {
        self.k.dot(y.data())
    }
}

/// Compute the ridge kernel through a Cholesky solve of the n×n system
/// (the inverse is never formed).
pub fn ridge_kernel(x: &DesignMatrix, lambda: f64) -> Result<RidgeKernel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParam(format!("lambda must be > 0, got {lambda}")));
    }
    let n = x.n();
    let mut gram = x.data().dot(&x.data().t());
    for i in 0..n {
        gram[[i, i]] += lambda;
    }
    let chol = Cholesky::decompose(&gram)?;
    // Kᵀ = (XXᵀ + λI)⁻¹ X, solved column by column
    let kt = chol.solve_mat(x.data());
    Ok(RidgeKernel { k: kt.t().to_owned(), lambda })
}

/// Conventional default regularization for the baselines:
/// `trace(XXᵀ)/n · 1/SNR²` with SNR = 3.
pub fn default_lambda(x: &DesignMatrix) -> f64 {
    let n = x.n();
    let trace: f64 = (0..n).map(|i| x.data().row(i).dot(&x.data().row(i))).sum();
    trace / n as f64 / 9.0
}

/// dSPM map: ridge rows scaled by `σ_j = √(σ²[KKᵀ]_jj)`.
pub fn dspm(x: &DesignMatrix, y: &MultiResponse, lambda: f64, sigma2: f64) -> Result<Array2<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParam(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let kernel = ridge_kernel(x, lambda)?;
    let mut map = kernel.estimate(y);
    for j in 0..x.p() {
        let row = kernel.k.row(j);
        let denom = (sigma2 * row.dot(&row)).sqrt();
        map.row_mut(j).mapv_inplace(|v| v / denom);
    }
    Ok(map)
}

/// sLORETA map: ridge rows scaled by `σ_j = √([K(σ²I + XXᵀ)Kᵀ]_jj)`.
pub fn sloreta(
    x: &DesignMatrix,
    y: &MultiResponse,
    lambda: f64,
    sigma2: f64,
) -> Result<Array2<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParam(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let kernel = ridge_kernel(x, lambda)?;
    let mut map = kernel.estimate(y);
    let gram = x.data().dot(&x.data().t()); // XXᵀ
    let h = kernel.k.dot(&gram); // p×n
    for j in 0..x.p() {
        let krow = kernel.k.row(j);
        // [K(σ²I + XXᵀ)Kᵀ]_jj = σ²‖K_j‖² + Σ_i H_ji K_ji
        let denom = (sigma2 * krow.dot(&krow) + h.row(j).dot(&krow)).sqrt();
        map.row_mut(j).mapv_inplace(|v| v / denom);
    }
    Ok(map)
}
