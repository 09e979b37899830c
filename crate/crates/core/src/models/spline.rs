//! Natural cubic smoothing spline via the Reinsch algorithm.
//!
//! Fitted values minimize `Σ (u_i − g(z_i))² + α ∫ g''²` with `α = n λ²`.
//! With `Q` (n × (n−2)) and `R` ((n−2) × (n−2)) the usual band matrices,
//! `γ` solves `(R + α Q'Q) γ = Q'u` and the fit is `u − α Q γ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::criterion::Matrix;
use crate::error::{Error, Result};

/// Banded Cholesky factor of a symmetric pentadiagonal matrix.
#[derive(Debug, Clone)]
struct PentaCholesky {
    /// `l[i] = [L(i, i−2), L(i, i−1), L(i, i)]`.
    l: Vec<[f64; 3]>,
}

impl PentaCholesky {
    /// `diag[i] = M(i,i)`, `off1[i] = M(i,i+1)`, `off2[i] = M(i,i+2)`.
    fn factor(diag: &[f64], off1: &[f64], off2: &[f64]) -> Result<Self> {
        let m = diag.len();
        let mut l = vec![[0.0; 3]; m];
        for i in 0..m {
            let l2 = if i >= 2 { off2[i - 2] / l[i - 2][2] } else { 0.0 };
            let l1 = if i >= 1 {
                let mut v = off1[i - 1];
                if i >= 2 {
                    v -= l2 * l[i - 1][1];
                }
                v / l[i - 1][2]
            } else {
                0.0
            };
            let d = diag[i] - l1 * l1 - l2 * l2;
            if !(d > 0.0) {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                    step: None,
                });
            }
            l[i] = [l2, l1, d.sqrt()];
        }
        Ok(PentaCholesky { l })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        for i in 0..m {
            let mut v = rhs[i];
            if i >= 1 {
                v -= self.l[i][1] * rhs[i - 1];
            }
            if i >= 2 {
                v -= self.l[i][0] * rhs[i - 2];
            }
            rhs[i] = v / self.l[i][2];
        }
        for i in (0..m).rev() {
            let mut v = rhs[i];
            if i + 1 < m {
                v -= self.l[i + 1][1] * rhs[i + 1];
            }
            if i + 2 < m {
                v -= self.l[i + 2][0] * rhs[i + 2];
            }
            rhs[i] = v / self.l[i][2];
        }
    }
}

/// A smoothing spline operator `u ↦ A(λ) u` for a fixed design.
#[derive(Debug, Clone)]
pub struct SmoothingSpline {
    z: Vec<f64>,
    lambda: f64,
    alpha: f64,
    /// Knot spacings `h_i = z_{i+1} − z_i`.
    h: Vec<f64>,
    chol: PentaCholesky,
}

impl SmoothingSpline {
    pub fn new(z: &[f64], lambda: f64) -> Result<Self> {
        let n = z.len();
        if n < 3 {
            return Err(Error::domain(format!("smoothing spline needs n >= 3 points, got {n}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda = {lambda} must be positive")));
        }
        if let Some(i) = (1..n).find(|&i| !(z[i] > z[i - 1])) {
            return Err(Error::domain(format!(
                "design points must be strictly increasing (z[{}] = {}, z[{i}] = {}); merge duplicates first",
                i - 1,
                z[i - 1],
                z[i]
            )));
        }
        let alpha = n as f64 * lambda * lambda;
        let h: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 2;
        // column j of Q has entries at rows j, j+1, j+2
        let qcol = |j: usize| [1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1]];
        let mut diag = vec![0.0; m];
        let mut off1 = vec![0.0; m.saturating_sub(1)];
        let mut off2 = vec![0.0; m.saturating_sub(2)];
        for j in 0..m {
            let a = qcol(j);
            diag[j] = (h[j] + h[j + 1]) / 3.0 + alpha * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
            if j + 1 < m {
                let b = qcol(j + 1);
                off1[j] = h[j + 1] / 6.0 + alpha * (a[1] * b[0] + a[2] * b[1]);
            }
            if j + 2 < m {
                let b = qcol(j + 2);
                off2[j] = alpha * a[2] * b[0];
            }
        }
        let chol = PentaCholesky::factor(&diag, &off1, &off2)?;
        Ok(SmoothingSpline {
            z: z.to_vec(),
            lambda,
            alpha,
            h,
            chol,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Roughness weight `n λ²`.
    pub fn roughness_weight(&self) -> f64 {
        self.alpha
    }

    /// Fitted values `A(λ) u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.z.len();
        assert_eq!(u.len(), n, "smoother input length");
        let h = &self.h;
        let mut gamma: Vec<f64> = (0..n - 2)
            .map(|j| (u[j + 1] - u[j]) / h[j] - (u[j + 2] - u[j + 1]) / h[j + 1])
            .map(|v| -v)
            .collect();
        self.chol.solve(&mut gamma);
        let mut g = u.to_vec();
        for (j, gj) in gamma.iter().enumerate() {
            let w = self.alpha * gj;
            g[j] -= w / h[j];
            g[j + 1] -= w * (-1.0 / h[j] - 1.0 / h[j + 1]);
            g[j + 2] -= w / h[j + 1];
        }
        g
    }

    /// Residuals `(I − A(λ)) u`.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let g = self.apply(u);
        u.iter().zip(g).map(|(a, b)| a - b).collect()
    }

    /// Dense influence matrix.
    pub fn matrix(&self) -> Matrix {
        let n = self.z.len();
        let mut a = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            e[j] = 0.0;
            a.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        a
    }
}

/// The influence matrix `A(λ)` of the natural cubic smoothing spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherMatrix {
    /// Row-major `n × n`.
    pub a: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl SmootherMatrix {
    pub fn as_matrix(&self) -> Matrix {
        let n = self.a.len();
        Matrix::from_fn(n, n, |i, j| self.a[i][j])
    }

    pub fn trace(&self) -> f64 {
        (0..self.a.len()).map(|i| self.a[i][i]).sum()
    }
}

pub fn smoother_matrix(z: &[f64], lambda: f64) -> Result<SmootherMatrix> {
    let m = SmoothingSpline::new(z, lambda)?.matrix();
    Ok(SmootherMatrix {
        a: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        lambda,
    })
}
