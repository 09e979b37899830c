//! Simulation designs for the three backends.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cem::{CEMDataset, CemVariant};
use super::cox_cs::CSDataset;
use super::plm::PLMDataset;
use super::{ModelDataset, ModelKind};
use crate::criterion::Matrix;
use crate::error::{Error, Result};

/// Upper end of the examination-time support `Y ~ U(0, 3]`.
pub const CS_EXAM_MAX: f64 = 3.0;

pub fn generate(model: ModelKind, n: usize, theta0: &[f64], seed: u64) -> Result<ModelDataset> {
    Ok(match model {
        ModelKind::CoxCs => ModelDataset::CoxCs(generate_cox_cs(n, theta0, seed)?),
        ModelKind::CemNormal => ModelDataset::Cem(generate_cem(CemVariant::ConditionalNormal, n, theta0, seed)?),
        ModelKind::CemExponential => {
            ModelDataset::Cem(generate_cem(CemVariant::ConditionalExponential, n, theta0, seed)?)
        }
        ModelKind::Plm => ModelDataset::Plm(generate_plm(n, theta0, seed)?),
    })
}

fn check(n: usize, theta0: &[f64]) -> Result<()> {
    if n < 3 {
        return Err(Error::domain(format!("sample size {n} must be at least 3")));
    }
    if theta0.is_empty() || theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("theta0 must be a non-empty finite vector"));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Z ~ U[−1,1]^d`, `Y ~ U(0,3]`, `T` with hazard `e^{θ'Z}`, `δ = 1{T ≤ Y}`.
pub fn generate_cox_cs(n: usize, theta0: &[f64], seed: u64) -> Result<CSDataset> {
    check(n, theta0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = theta0.len();
    let (mut y, mut delta, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let zi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let yi = CS_EXAM_MAX * (1.0 - rng.random::<f64>());
        let t: f64 = Exp1.sample(&mut rng);
        let t = t / dot(theta0, &zi).exp();
        y.push(yi);
        delta.push(t <= yi);
        z.push(zi);
    }
    CSDataset::new(y, delta, z)
}

/// Variance function of the normal design.
pub fn cem_normal_eta0(z: f64) -> f64 {
    1.0 + z * z / 2.0
}

/// Log-scale nuisance of the exponential design.
pub fn cem_exponential_eta0(z: f64) -> f64 {
    (std::f64::consts::PI * z).sin() / 2.0
}

/// `Z ~ U[0,1]`, `W ~ N(0, I)`; `Y ~ N(θ'W, 1 + Z²/2)` or `Y ~ Exp(mean e^{θ'W + sin(πZ)/2})`.
pub fn generate_cem(variant: CemVariant, n: usize, theta0: &[f64], seed: u64) -> Result<CEMDataset> {
    check(n, theta0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = theta0.len();
    let (mut y, mut w, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let zi: f64 = rng.random();
        let wi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let lin = dot(theta0, &wi);
        let yi = match variant {
            CemVariant::ConditionalNormal => {
                let e: f64 = StandardNormal.sample(&mut rng);
                lin + cem_normal_eta0(zi).sqrt() * e
            }
            CemVariant::ConditionalExponential => {
                let e: f64 = Exp1.sample(&mut rng);
                (lin + cem_exponential_eta0(zi)).exp() * e
            }
        };
        y.push(yi);
        w.push(wi);
        z.push(zi);
    }
    CEMDataset::new(y, w, z, variant)
}

/// Partial linear model design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmDesign {
    pub theta0: Vec<f64>,
    /// AR(1) correlation of the design rows.
    pub rho: f64,
    pub sigma: f64,
}

impl Default for PlmDesign {
    fn default() -> Self {
        PlmDesign {
            theta0: vec![3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
            rho: 0.5,
            sigma: 1.0,
        }
    }
}

impl PlmDesign {
    /// `Σ_jk = ρ^{|j−k|}`.
    pub fn covariance(&self) -> Matrix {
        let d = self.theta0.len();
        Matrix::from_fn(d, d, |i, j| self.rho.powi((i as i32 - j as i32).abs()))
    }
}

pub fn plm_eta0(z: f64) -> f64 {
    (2.0 * std::f64::consts::PI * z).sin()
}

/// `z_i = i/n`, `W ~ N(0, AR(0.5))`, `y = Wθ + sin(2πz) + ε`, `ε ~ N(0, 1)`.
pub fn generate_plm(n: usize, theta0: &[f64], seed: u64) -> Result<PLMDataset> {
    let design = PlmDesign {
        theta0: theta0.to_vec(),
        ..PlmDesign::default()
    };
    generate_plm_with(n, &design, seed)
}

pub fn generate_plm_with(n: usize, design: &PlmDesign, seed: u64) -> Result<PLMDataset> {
    check(n, &design.theta0)?;
    let d = design.theta0.len();
    let chol = Cholesky::new(design.covariance())
        .ok_or_else(|| Error::domain("design covariance is not positive definite"))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut w, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 1..=n {
        let zi = i as f64 / n as f64;
        let e = nalgebra::DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let wi: Vec<f64> = (&l * e).iter().copied().collect();
        let eps: f64 = StandardNormal.sample(&mut rng);
        y.push(dot(&design.theta0, &wi) + plm_eta0(zi) + design.sigma * eps);
        w.push(wi);
        z.push(zi);
    }
    PLMDataset::new(y, w, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_determinism() {
        for kind in [ModelKind::CoxCs, ModelKind::CemNormal, ModelKind::CemExponential, ModelKind::Plm] {
            let a = generate(kind, 40, &[0.5, -0.2], 9).unwrap();
            let b = generate(kind, 40, &[0.5, -0.2], 9).unwrap();
            let c = generate(kind, 40, &[0.5, -0.2], 10).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn plm_design_points() {
        let d = generate_plm(50, &[1.0], 1).unwrap();
        for (i, z) in d.z.iter().enumerate() {
            assert_eq!(*z, (i + 1) as f64 / 50.0);
        }
    }

    #[test]
    fn censoring_fraction_in_band() {
        for seed in 0..5 {
            let d = generate_cox_cs(400, &[0.5], seed).unwrap();
            let f = d.delta.iter().filter(|v| **v).count() as f64 / 400.0;
            assert!(f > 0.2 && f < 0.8, "{f}");
        }
    }

    #[test]
    fn tiny_samples_rejected() {
        assert!(generate(ModelKind::Plm, 2, &[1.0], 0).is_err());
    }
}
