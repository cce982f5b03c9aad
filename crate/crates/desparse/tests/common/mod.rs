//! Independent oracles used across the integration and acceptance suites.
//!
//! Everything here is implemented from scratch against the mathematical
//! definitions (proximal gradient instead of coordinate descent, literal
//! double loops instead of matrix identities) so it certifies the library
//! implementations rather than mirroring them.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Multi-task Lasso objective (1/2n)‖Y − XB‖²_F + λ Σ_j ‖B_j‖.
pub fn mtl_objective(x: ArrayView2<f64>, y: ArrayView2<f64>, b: &Array2<f64>, lambda: f64) -> f64 {
    let n = x.nrows() as f64;
    let resid = &y.to_owned() - &x.dot(b);
    let fit = resid.iter().map(|v| v * v).sum::<f64>() / (2.0 * n);
    let pen: f64 =
        (0..b.nrows()).map(|j| b.row(j).iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
    fit + lambda * pen
}

/// Largest eigenvalue of XᵀX/n by power iteration.
fn lipschitz(x: ArrayView2<f64>) -> f64 {
    let p = x.ncols();
    let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..500 {
        let w = x.t().dot(&x.dot(&v));
        let norm = w.iter().map(|e| e * e).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        lam = norm;
    }
    lam / x.nrows() as f64
}

/// Proximal-gradient (FISTA) solver for the multi-task Lasso, run to a
/// duality gap of `tol_gap` relative to the zero-solution objective.
pub fn fista_mtlasso(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    lambda: f64,
    tol_gap: f64,
    max_iter: usize,
) -> Array2<f64> {
    let (n, p) = x.dim();
    let t = y.ncols();
    let nf = n as f64;
    let p0 = y.iter().map(|v| v * v).sum::<f64>() / (2.0 * nf);
    if p0 == 0.0 {
        return Array2::zeros((p, t));
    }
    let step = 1.0 / lipschitz(x).max(1e-300);
    let mut b = Array2::<f64>::zeros((p, t));
    let mut z = b.clone();
    let mut momentum = 1.0_f64;

    for it in 0..max_iter {
        // gradient step on the smooth part at the extrapolated point
        let resid = &y.to_owned() - &x.dot(&z);
        let grad = -x.t().dot(&resid) / nf;
        let mut next = &z - &(grad * step);
        // row-group soft threshold at λ·step
        for j in 0..p {
            let norm = next.row(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            let shrink = if norm > lambda * step { 1.0 - lambda * step / norm } else { 0.0 };
            next.row_mut(j).mapv_inplace(|v| v * shrink);
        }
        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        z = &next + &((&next - &b) * ((momentum - 1.0) / m_next));
        b = next;
        momentum = m_next;

        if it % 10 == 9 {
            let gap = mtl_duality_gap(x, y, &b, lambda);
            if gap <= tol_gap * p0 {
                break;
            }
        }
    }
    b
}

/// Duality gap for the oracle solver, written out from the Fenchel dual:
/// Θ feasible iff ‖X_jᵀΘ‖ ≤ λ for all j, D(Θ) = ⟨Θ,Y⟩ − (n/2)‖Θ‖².
pub fn mtl_duality_gap(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    b: &Array2<f64>,
    lambda: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let resid = &y.to_owned() - &x.dot(b);
    let primal = mtl_objective(x, y, b, lambda);
    let corr = x.t().dot(&resid);
    let max_row = (0..corr.nrows())
        .map(|j| corr.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    let scale = n.max(max_row / lambda);
    let dot_y = resid.iter().zip(y.iter()).map(|(r, v)| r * v).sum::<f64>();
    let theta_sq = resid.iter().map(|v| v * v).sum::<f64>() / (scale * scale);
    (primal - (dot_y / scale - 0.5 * n * theta_sq)).max(0.0)
}

/// Single-task FISTA Lasso (T = 1 view of the oracle).
pub fn fista_lasso(
    x: ArrayView2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    tol_gap: f64,
    max_iter: usize,
) -> Array1<f64> {
    let y2 = y
        .clone()
        .insert_axis(ndarray::Axis(1));
    let b = fista_mtlasso(x, y2.view(), lambda, tol_gap, max_iter);
    b.column(0).to_owned()
}

/// Brute-force adaptive quantile aggregation: scan the quantile jump set
/// γ ∈ {b/B} ∩ (γ_min, 1] and take the minimum of quantile_γ/γ.
pub fn aggregate_bruteforce(pvals: &[f64], gamma_min: f64) -> f64 {
    let b_count = pvals.len();
    let mut sorted = pvals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = f64::INFINITY;
    for b in 1..=b_count {
        let gamma = b as f64 / b_count as f64;
        if gamma <= gamma_min {
            continue;
        }
        // empirical γ-quantile is the ⌈γB⌉-th order statistic = sorted[b-1]
        best = best.min(sorted[b - 1] / gamma);
    }
    // limit γ → γ_min⁺: the quantile index just above γ_min
    let k_lim = (gamma_min * b_count as f64).floor() as usize + 1;
    if k_lim <= b_count {
        best = best.min(sorted[k_lim - 1] / gamma_min);
    }
    (1.0 - gamma_min.ln()).mul_add(best, 0.0).min(1.0)
}

/// Literal debias formula: row j = z_jᵀY/(z_jᵀX_j) − Σ_{k≠j} z_jᵀX_k B_k/(z_jᵀX_j),
/// evaluated with the naive O(np²T) double loop.
pub fn debias_naive(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    b_mtl: &Array2<f64>,
    z: &Array2<f64>,
) -> Array2<f64> {
    let (_, p) = x.dim();
    let t = y.ncols();
    let mut out = Array2::zeros((p, t));
    for j in 0..p {
        let zj = z.column(j);
        let denom = zj.dot(&x.column(j));
        for s in 0..t {
            let mut v = zj.dot(&y.column(s)) / denom;
            for k in 0..p {
                if k != j {
                    v -= zj.dot(&x.column(k)) * b_mtl[[k, s]] / denom;
                }
            }
            out[[j, s]] = v;
        }
    }
    out
}

pub fn random_standardized(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..p {
        let mut col = x.column_mut(j);
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let scale = (col.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        col.mapv_inplace(|v| v / scale);
    }
    x
}

pub fn random_matrix(n: usize, t: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, t), |_| rng.sample::<f64, _>(StandardNormal))
}
