//! AR(1) Toeplitz noise covariance and the small dense Cholesky kernel used
//! for its inverse quadratic forms.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense Cholesky factorization `A = L Lᵀ` of a symmetric positive definite
/// matrix. Sized for the small systems used here (T ≤ ~50 noise covariances,
/// n×n ridge systems).
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn decompose(a: &Array2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "cholesky requires a square matrix, got {}×{}",
                n,
                a.ncols()
            )));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite);
                    }
                    l[[i, i]] = s.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `L w = b` (forward substitution).
    pub fn forward(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let mut w = b.to_owned();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.l[[i, k]] * w[k];
            }
            w[i] = s / self.l[[i, i]];
        }
        w
    }

    /// Solve `A x = b` via the two triangular solves.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(b.dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }

    /// Quadratic form `aᵀ A⁻¹ a = ‖L⁻¹ a‖²`.
    pub fn quadform(&self, a: ArrayView1<f64>) -> f64 {
        self.forward(a).iter().map(|v| v * v).sum()
    }
}

/// The (σ², ρ) parameterization of the T×T noise covariance
/// `M_{t,u} = σ² ρ^{|t−u|}`, symmetric positive definite for ρ ∈ [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzAr1 {
    sigma2: f64,
    rho: f64,
    t: usize,
}

impl ToeplitzAr1 {
    pub fn new(sigma2: f64, rho: f64, t: usize) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParam(format!("sigma2 must be positive, got {sigma2}")));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParam(format!("rho must lie in [0, 1), got {rho}")));
        }
        if t == 0 {
            return Err(Error::InvalidParam("T must be at least 1".into()));
        }
        Ok(Self { sigma2, rho, t })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Materialize the dense covariance matrix `M`.
    pub fn dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.t, self.t), |(i, j)| {
            self.sigma2 * self.rho.powi((i as i32 - j as i32).abs())
        })
    }

    /// Correlation matrix `R = M/σ²`.
    pub fn correlation(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.t, self.t), |(i, j)| {
            self.rho.powi((i as i32 - j as i32).abs())
        })
    }

    pub fn factor(&self) -> Result<Cholesky> {
        Cholesky::decompose(&self.dense())
    }

    /// Inverse quadratic form `aᵀ M⁻¹ a`, evaluated through a Cholesky
    /// factorization of `M`.
    pub fn quadform(&self, a: ArrayView1<f64>) -> Result<f64> {
        if a.len() != self.t {
            return Err(Error::ShapeMismatch(format!(
                "quadform expects a length-{} vector, got {}",
                self.t,
                a.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadform input"));
        }
        Ok(self.factor()?.quadform(a))
    }
}
