//! The desparsified multi-task Lasso inference engine: nodewise score
//! vectors, the debiased estimator, AR(1) noise-parameter estimation, the
//! Fisher test statistic and p-values.
//!
//! The full pipeline ([`d_mtlasso`]) runs, in order: cross-validated
//! multi-task Lasso → residuals → support size → noise estimation → nodewise
//! scores → debiasing → per-feature statistics with Bonferroni correction.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{CoefMatrix, DesignMatrix, MultiResponse};
use crate::distributions::fisher_sf;
use crate::error::{Error, Result};
use crate::solvers::{
    cross_validate, solve_lasso_raw, solve_mtlasso, CvConfig, LassoConfig, SolveStatus,
};
use crate::toeplitz::ToeplitzAr1;

/// Threshold under which a score inner product `z_jᵀX_j` counts as degenerate
/// (relative to n).
const DEGENERATE_TOL: f64 = 1e-12;

/// Settings for the nodewise regressions producing the score vectors.
///
/// Each feature j is regressed on the remaining columns with penalty
/// `α_j = c · ‖X^{(−j)ᵀ} X_j‖_∞ / n`; `c` is the regularization fraction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodewiseConfig {
    pub c: f64,
    /// Solver template for the nodewise Lassos (its `lambda` is ignored).
    pub solver: LassoConfig,
}

impl Default for NodewiseConfig {
    fn default() -> Self {
        Self { c: 0.005, solver: LassoConfig::default() }
    }
}

impl NodewiseConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::InvalidParam(format!("c must lie in (0, 1], got {}", self.c)));
        }
        Ok(())
    }
}

/// Residual score vectors of the nodewise Lasso, with the diagonal of the
/// relaxed precision estimate `Ω̂_jj = n ‖z_j‖² / (z_jᵀX_j)²`.
///
/// Off-diagonal entries of `Ω̂` never enter the statistic, so only the
/// diagonal is materialized.
#[derive(Debug, Clone)]
pub struct ScoreVectors {
    /// n×p matrix of score vectors (column j is z_j).
    z: Array2<f64>,
    omega_diag: Vec<f64>,
    zx_dot: Vec<f64>,
    /// Features whose score is degenerate; inference is impossible for them.
    degenerate: Vec<usize>,
}

impl ScoreVectors {
    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn omega_diag(&self) -> &[f64] {
        &self.omega_diag
    }

    pub fn zx_dot(&self) -> &[f64] {
        &self.zx_dot
    }

    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }
}

/// Nodewise score vectors for every feature; errors on the first degenerate
/// feature. Use [`nodewise_scores_with_exclusions`] to collect degenerate
/// features instead of failing.
pub fn nodewise_scores(x: &DesignMatrix, cfg: &NodewiseConfig) -> Result<ScoreVectors> {
    let scores = nodewise_scores_with_exclusions(x, cfg)?;
    if let Some(&j) = scores.degenerate.first() {
        return Err(Error::DegenerateScore(j));
    }
    Ok(scores)
}

/// Nodewise score vectors, flagging degenerate features rather than failing.
pub fn nodewise_scores_with_exclusions(
    x: &DesignMatrix,
    cfg: &NodewiseConfig,
) -> Result<ScoreVectors> {
    cfg.validate()?;
    let (n, p) = (x.n(), x.p());
    if p < 2 {
        return Err(Error::ShapeMismatch("nodewise scores require p ≥ 2".into()));
    }
    let nf = n as f64;
    let data = x.data();

    let columns: Vec<(Vec<f64>, f64)> = (0..p)
        .into_par_iter()
        .map(|j| {
            let xj = data.column(j);
            // design without column j
            let mut xm = Array2::zeros((n, p - 1));
            for (dst, k) in (0..p).filter(|&k| k != j).enumerate() {
                xm.column_mut(dst).assign(&data.column(k));
            }
            let alpha_max = (0..p - 1)
                .map(|k| xm.column(k).dot(&xj).abs() / nf)
                .fold(0.0_f64, f64::max);
            let alpha = cfg.c * alpha_max;
            let sol = solve_lasso_raw(xm.view(), xj, &cfg.solver.with_lambda(alpha), None)
                .expect("nodewise lasso with validated config cannot fail");
            let beta = sol.coef.into_inner();
            let mut z = xj.to_owned();
            for k in 0..p - 1 {
                let b = beta[[k, 0]];
                if b != 0.0 {
                    z.zip_mut_with(&xm.column(k), |zi, xi| *zi -= b * xi);
                }
            }
            let dot = z.dot(&xj);
            (z.to_vec(), dot)
        })
        .collect();

    let mut z = Array2::zeros((n, p));
    let mut omega_diag = Vec::with_capacity(p);
    let mut zx_dot = Vec::with_capacity(p);
    let mut degenerate = Vec::new();
    for (j, (zj, dot)) in columns.into_iter().enumerate() {
        let z_sq: f64 = zj.iter().map(|v| v * v).sum();
        for (i, v) in zj.into_iter().enumerate() {
            z[[i, j]] = v;
        }
        if dot.abs() < DEGENERATE_TOL * nf {
            degenerate.push(j);
            omega_diag.push(f64::NAN);
            zx_dot.push(dot);
        } else {
            omega_diag.push(nf * z_sq / (dot * dot));
            zx_dot.push(dot);
        }
    }
    Ok(ScoreVectors { z, omega_diag, zx_dot, degenerate })
}

/// Debiased estimator: row j is
/// `z_jᵀY/(z_jᵀX_j) − Σ_{k≠j} (z_jᵀX_k/(z_jᵀX_j)) B_k`, evaluated as
/// `B + Zᵀ(Y − XB)` row-scaled by `1/(z_jᵀX_j)` for O(npT) cost.
///
/// Degenerate rows are left at their input value (no correction possible).
pub fn debias(
    x: &DesignMatrix,
    y: &MultiResponse,
    b_mtl: &CoefMatrix,
    scores: &ScoreVectors,
) -> Result<Array2<f64>> {
    let (n, p) = (x.n(), x.p());
    let t = y.t();
    if y.n() != n || b_mtl.p() != p || b_mtl.t() != t || scores.n() != n || scores.p() != p {
        return Err(Error::ShapeMismatch(
            "debias requires X (n×p), Y (n×T), B (p×T) and scores (n×p) with matching dims".into(),
        ));
    }
    let resid = y.data() - &x.data().dot(b_mtl.data());
    let corr = scores.z.t().dot(&resid); // p×T
    let mut out = b_mtl.data().clone();
    for j in 0..p {
        if scores.degenerate.contains(&j) {
            continue;
        }
        let denom = scores.zx_dot[j];
        let mut row = out.row_mut(j);
        for s in 0..t {
            row[s] += corr[[j, s]] / denom;
        }
    }
    Ok(out)
}

/// Median of a slice (mean of the two central order statistics for even
/// lengths).
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn pearson(a: ArrayView2<f64>, t0: usize, t1: usize) -> f64 {
    let n = a.nrows() as f64;
    let (ca, cb) = (a.column(t0), a.column(t1));
    let (ma, mb) = (ca.sum() / n, cb.sum() / n);
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.nrows() {
        let da = ca[i] - ma;
        let db = cb[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        num / (va * vb).sqrt()
    }
}

/// Estimate the AR(1) noise parameters from multi-task residuals:
/// `σ̂² = median_t ‖Ê_{·,t}‖²/(n−ŝ)` and `ρ̂ = median_t corr(Ê_{·,t}, Ê_{·,t+1})`,
/// with `ρ̂` clipped into [0, 1−1e-6).
///
/// The median across time steps avoids being thrown off by prospective
/// under-fitted time steps.
pub fn estimate_noise(residuals: &Array2<f64>, s_hat: usize) -> Result<ToeplitzAr1> {
    let (n, t) = residuals.dim();
    if t < 1 {
        return Err(Error::ShapeMismatch("residuals need T ≥ 1".into()));
    }
    if s_hat >= n {
        return Err(Error::SupportTooLarge { s_hat, n });
    }
    let dof = (n - s_hat) as f64;
    let sigma2_per_t: Vec<f64> = residuals
        .axis_iter(Axis(1))
        .map(|col| col.iter().map(|v| v * v).sum::<f64>() / dof)
        .collect();
    let sigma2 = median(&sigma2_per_t);
    if sigma2 == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let rho = if t >= 2 {
        let lags: Vec<f64> = (0..t - 1).map(|s| pearson(residuals.view(), s, s + 1)).collect();
        median(&lags).clamp(0.0, 1.0 - 1e-6)
    } else {
        0.0
    };
    ToeplitzAr1::new(sigma2, rho, t)
}

/// Per-feature Fisher statistics and p-values:
/// `f̂_j = n ‖B̂_{j,·}‖²_{M̂⁻¹} / (T Ω̂_jj)` compared against `F(T, n−ŝ)`.
///
/// Degenerate features receive statistic 0 and p-value 1.
pub fn test_statistics(
    beta_deb: &Array2<f64>,
    scores: &ScoreVectors,
    m_hat: &ToeplitzAr1,
    s_hat: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (p, t) = beta_deb.dim();
    if p != scores.p() || t != m_hat.t() {
        return Err(Error::ShapeMismatch(
            "test statistics require matching (p, T) across estimator, scores and noise".into(),
        ));
    }
    let n = scores.n();
    if s_hat >= n {
        return Err(Error::SupportTooLarge { s_hat, n });
    }
    let dof = (n - s_hat) as f64;
    let factor = m_hat.factor()?;
    let nf = n as f64;
    let tf = t as f64;
    let mut stat = Vec::with_capacity(p);
    let mut pval = Vec::with_capacity(p);
    for j in 0..p {
        if scores.degenerate.contains(&j) {
            stat.push(0.0);
            pval.push(1.0);
            continue;
        }
        let quad = factor.quadform(beta_deb.row(j));
        let f = nf * quad / (tf * scores.omega_diag[j]);
        stat.push(f);
        pval.push(fisher_sf(f, tf, dof));
    }
    Ok((stat, pval))
}

/// Settings for the full inference pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct DmtConfig {
    pub cv: CvConfig,
    /// Template for the final and cross-validated multi-task solves.
    pub solver: LassoConfig,
    pub nodewise: NodewiseConfig,
}

/// Summary of the clustering behind a compressed inference run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub c: usize,
    pub avg_diameter: f64,
    pub max_diameter: f64,
    /// Feature → cluster assignment for a single clustering; empty for
    /// ensemble results, which mix many clusterings.
    pub labels: Vec<usize>,
}

/// Per-feature debiased coefficients, test statistics and corrected p-values.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub beta_debiased: Array2<f64>,
    pub stat: Vec<f64>,
    pub pval: Vec<f64>,
    /// Bonferroni-corrected p-values (factor = number of tested features).
    pub pval_corrected: Vec<f64>,
    pub noise: ToeplitzAr1,
    pub s_hat: usize,
    /// Features excluded from inference (degenerate scores); they carry
    /// p-value 1.
    pub excluded: Vec<usize>,
    /// Penalty selected by cross-validation.
    pub lambda: f64,
    /// Relative duality gap of the final multi-task solve.
    pub solver_gap: f64,
    pub solver_sweeps: usize,
    pub converged: bool,
    pub cluster: Option<ClusterInfo>,
}

impl InferenceResult {
    pub fn p(&self) -> usize {
        self.beta_debiased.nrows()
    }

    pub fn t(&self) -> usize {
        self.beta_debiased.ncols()
    }
}

/// The desparsified multi-task Lasso: cross-validated MTLasso fit, residual
/// noise estimation, nodewise scores, debiasing and Fisher p-values with
/// Bonferroni correction. Deterministic under `cfg.cv.seed`.
pub fn d_mtlasso(x: &DesignMatrix, y: &MultiResponse, cfg: &DmtConfig) -> Result<InferenceResult> {
    let cv = cross_validate(x, y, &cfg.solver, &cfg.cv)?;
    let sol = solve_mtlasso(x, y, &cfg.solver.with_lambda(cv.lambda_best))?;
    let b_mtl = sol.coef;
    let resid = y.data() - &x.data().dot(b_mtl.data());
    let s_hat = b_mtl.support_size();
    if s_hat >= x.n() {
        return Err(Error::SupportTooLarge { s_hat, n: x.n() });
    }
    let noise = estimate_noise(&resid, s_hat)?;
    let scores = nodewise_scores_with_exclusions(x, &cfg.nodewise)?;
    let beta_deb = debias(x, y, &b_mtl, &scores)?;
    let (stat, pval) = test_statistics(&beta_deb, &scores, &noise, s_hat)?;
    let tested = (x.p() - scores.degenerate().len()) as f64;
    let pval_corrected = pval.iter().map(|&q| (tested * q).min(1.0)).collect();
    Ok(InferenceResult {
        beta_debiased: beta_deb,
        stat,
        pval,
        pval_corrected,
        noise,
        s_hat,
        excluded: scores.degenerate().to_vec(),
        lambda: cv.lambda_best,
        solver_gap: sol.gap,
        solver_sweeps: sol.sweeps,
        converged: sol.status == SolveStatus::Converged,
        cluster: None,
    })
}
