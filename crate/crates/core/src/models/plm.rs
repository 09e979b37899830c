//! Partial linear model `y = Wθ + η(z) + ε` with a smoothing-spline nuisance
//! and an adaptive-lasso penalty on θ.
//!
//! Profiling η out gives `S̃(θ) = (y − Wθ)'(I − A)(y − Wθ)`, quadratic in θ,
//! stored as `c − 2θ'b + θ'Gθ` with `G = W'(I − A)W`, `b = W'(I − A)y`.

use serde::{Deserialize, Serialize};

use super::spline::SmoothingSpline;
use crate::criterion::{condition_number, Matrix, ProfiledCriterion, Vector};
use crate::engine::SINGULAR_CONDITION;
use crate::error::{Error, Result};

pub const COORDINATE_DESCENT_TOL: f64 = 1e-10;
pub const COORDINATE_DESCENT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLMDataset {
    pub y: Vec<f64>,
    /// Rows of the `n × d` design.
    pub w: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

impl PLMDataset {
    pub fn new(y: Vec<f64>, w: Vec<Vec<f64>>, z: Vec<f64>) -> Result<Self> {
        let d = PLMDataset { y, w, z };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.w.len() != n || self.z.len() != n {
            return Err(Error::domain("y, W and z must have equal lengths"));
        }
        let d = self.dim();
        if d == 0 || self.w.iter().any(|r| r.len() != d) {
            return Err(Error::domain("design rows must share one positive length"));
        }
        if let Some(i) = (1..n).find(|&i| !(self.z[i] > self.z[i - 1])) {
            return Err(Error::domain(format!("z must be strictly increasing (index {i})")));
        }
        Ok(())
    }

    pub fn design(&self) -> Matrix {
        Matrix::from_fn(self.len(), self.dim(), |i, j| self.w[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub tau: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Initial estimate entering the penalty weights `1/|θ̃_j|^γ`.
    pub theta_tilde: Vec<f64>,
}

fn default_gamma() -> f64 {
    1.0
}

impl PenaltyConfig {
    /// `λ = λ₀ n^{-2/5}`, `τ = τ₀ n^{-2/5}` (cubic splines).
    pub fn scaled(n: usize, lambda0: f64, tau0: f64, theta_tilde: Vec<f64>) -> Self {
        let f = (n as f64).powf(-0.4);
        PenaltyConfig {
            lambda: lambda0 * f,
            tau: tau0 * f,
            gamma: 1.0,
            theta_tilde,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!("lambda = {} must be positive", self.lambda)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::domain(format!("tau = {} must be >= 0", self.tau)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::domain(format!("gamma = {} must be positive", self.gamma)));
        }
        if self.theta_tilde.len() != d {
            return Err(Error::domain("theta_tilde length differs from the design dimension"));
        }
        if self.tau > 0.0 {
            if let Some(j) = self.theta_tilde.iter().position(|t| *t == 0.0 || !t.is_finite()) {
                return Err(Error::domain(format!("theta_tilde[{j}] = 0: penalty weight undefined")));
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.theta_tilde.iter().map(|t| t.abs().powf(-self.gamma)).collect()
    }
}

/// `G`, `b`, `c` of the profiled quadratic for one `(data, λ)`.
#[derive(Debug, Clone)]
pub struct PartialSplineSystem {
    pub n: usize,
    pub gram: Matrix,
    pub cross: Vector,
    pub yy: f64,
    pub lambda: f64,
}

impl PartialSplineSystem {
    pub fn new(data: &PLMDataset, lambda: f64) -> Result<Self> {
        data.validate()?;
        let spline = SmoothingSpline::new(&data.z, lambda)?;
        let (n, d) = (data.len(), data.dim());
        let w = data.design();
        let mut rw = Matrix::zeros(n, d);
        for j in 0..d {
            let col: Vec<f64> = w.column(j).iter().copied().collect();
            rw.set_column(j, &Vector::from_vec(spline.residual(&col)));
        }
        let ry = Vector::from_vec(spline.residual(&data.y));
        let g = w.transpose() * &rw;
        let gram = (&g + g.transpose()) * 0.5;
        let cross = w.transpose() * &ry;
        let yy = Vector::from_column_slice(&data.y).dot(&ry);
        Ok(PartialSplineSystem {
            n,
            gram,
            cross,
            yy,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.cross.len()
    }

    /// `S̃(θ)`.
    pub fn profiled_rss(&self, theta: &Vector) -> f64 {
        self.yy - 2.0 * theta.dot(&self.cross) + theta.dot(&(&self.gram * theta))
    }

    fn solve_gram(&self, rhs: &Vector) -> Result<Vector> {
        let cond = condition_number(&self.gram);
        if !(cond <= SINGULAR_CONDITION) {
            return Err(Error::Singular {
                condition: cond,
                step: None,
            });
        }
        self.gram.clone().lu().solve(rhs).ok_or(Error::Singular {
            condition: cond,
            step: None,
        })
    }

    /// `G⁻¹ b`.
    pub fn unpenalized_fit(&self) -> Result<Vector> {
        self.solve_gram(&self.cross)
    }
}

/// `θ̃_λ = [W'(I − A)W]⁻¹ W'(I − A)y`.
pub fn partial_spline_fit(data: &PLMDataset, lambda: f64) -> Result<Vector> {
    PartialSplineSystem::new(data, lambda)?.unpenalized_fit()
}

/// `S̃(θ) + n τ² Σ |θ_j| / |θ̃_j|^γ`, to be minimized.
pub fn double_penalty_objective(data: &PLMDataset, cfg: &PenaltyConfig, theta: &Vector) -> Result<f64> {
    let sys = PartialSplineSystem::new(data, cfg.lambda)?;
    cfg.validate(sys.dim())?;
    Ok(penalized_value(&sys, cfg, theta))
}

fn penalized_value(sys: &PartialSplineSystem, cfg: &PenaltyConfig, theta: &Vector) -> f64 {
    let pen: f64 = if cfg.tau > 0.0 {
        cfg.weights().iter().zip(theta.iter()).map(|(w, t)| w * t.abs()).sum()
    } else {
        0.0
    };
    sys.profiled_rss(theta) + sys.n as f64 * cfg.tau * cfg.tau * pen
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Components are set to zero when `|θ_j| < τ² n^{1/2} w_j`.
pub fn sparsity_threshold(n: usize, cfg: &PenaltyConfig) -> Vec<f64> {
    let f = cfg.tau * cfg.tau * (n as f64).sqrt();
    cfg.weights().iter().map(|w| f * w).collect()
}

fn hard_threshold(theta: Vector, thresholds: &[f64]) -> Vector {
    Vector::from_iterator(
        theta.len(),
        theta.iter().zip(thresholds).map(|(t, h)| if t.abs() < *h { 0.0 } else { *t }),
    )
}

fn one_step_with(sys: &PartialSplineSystem, cfg: &PenaltyConfig, theta0: &Vector) -> Result<Vector> {
    let n = sys.n as f64;
    if theta0.len() != sys.dim() {
        return Err(Error::domain("theta0 length differs from the design dimension"));
    }
    if cfg.tau > 0.0 {
        if let Some(j) = theta0.iter().position(|t| *t == 0.0) {
            return Err(Error::domain(format!("theta0[{j}] = 0: sign undefined for the one-step update")));
        }
    }
    let weights = cfg.weights();
    let delta = Vector::from_iterator(
        theta0.len(),
        theta0.iter().zip(&weights).map(|(t, w)| if cfg.tau > 0.0 { sign(*t) * w } else { 0.0 }),
    );
    let score = (&sys.cross - &sys.gram * theta0) / n - delta * (cfg.tau * cfg.tau / 2.0);
    let step = sys.solve_gram(&(score * n))?;
    let updated = theta0 + step;
    Ok(if cfg.tau > 0.0 {
        hard_threshold(updated, &sparsity_threshold(sys.n, cfg))
    } else {
        updated
    })
}

/// A single Newton step on the penalized criterion from `θ0`, then hard
/// thresholding of components inside the sparsity band.
pub fn one_step_sparse(data: &PLMDataset, cfg: &PenaltyConfig, theta0: &Vector) -> Result<Vector> {
    let sys = PartialSplineSystem::new(data, cfg.lambda)?;
    cfg.validate(sys.dim())?;
    one_step_with(&sys, cfg, theta0)
}

fn coordinate_descent(sys: &PartialSplineSystem, cfg: &PenaltyConfig) -> Result<Vector> {
    let d = sys.dim();
    let n = sys.n as f64;
    let weights = cfg.weights();
    let mut theta = sys.unpenalized_fit()?;
    if cfg.tau == 0.0 {
        return Ok(theta);
    }
    let g = &sys.gram;
    for j in 0..d {
        if !(g[(j, j)] > 0.0) {
            return Err(Error::Singular {
                condition: f64::INFINITY,
                step: None,
            });
        }
    }
    for _ in 0..COORDINATE_DESCENT_MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            let mut rho = sys.cross[j];
            for k in 0..d {
                if k != j {
                    rho -= g[(j, k)] * theta[k];
                }
            }
            let thr = n * cfg.tau * cfg.tau * weights[j] / 2.0;
            let soft = sign(rho) * (rho.abs() - thr).max(0.0);
            let new = soft / g[(j, j)];
            max_change = max_change.max((new - theta[j]).abs());
            theta[j] = new;
        }
        if max_change < COORDINATE_DESCENT_TOL {
            return Ok(theta);
        }
    }
    Err(Error::NoConvergence {
        iterations: COORDINATE_DESCENT_MAX_SWEEPS,
        message: "coordinate descent for the penalized partial spline".into(),
    })
}

/// Exact minimizer of the double-penalty objective by cyclic coordinate
/// descent with closed-form soft-thresholding.
pub fn full_sparse_fit(data: &PLMDataset, cfg: &PenaltyConfig) -> Result<Vector> {
    let sys = PartialSplineSystem::new(data, cfg.lambda)?;
    cfg.validate(sys.dim())?;
    coordinate_descent(&sys, cfg)
}

/// `Ŝ_n(θ) = −½ [S̃(θ) + n τ² Σ w_j |θ_j|]`, so that `−Ŝ⁽²⁾/n = G/n`.
#[derive(Debug, Clone)]
pub struct PartialSplineCriterion {
    pub system: PartialSplineSystem,
    pub penalty: PenaltyConfig,
    thresholds: Vec<f64>,
}

impl PartialSplineCriterion {
    pub fn new(data: &PLMDataset, penalty: PenaltyConfig) -> Result<Self> {
        let system = PartialSplineSystem::new(data, penalty.lambda)?;
        Self::from_system(system, penalty)
    }

    pub fn from_system(system: PartialSplineSystem, penalty: PenaltyConfig) -> Result<Self> {
        penalty.validate(system.dim())?;
        let thresholds = if penalty.tau > 0.0 {
            sparsity_threshold(system.n, &penalty)
        } else {
            vec![0.0; system.dim()]
        };
        Ok(PartialSplineCriterion {
            system,
            penalty,
            thresholds,
        })
    }

    pub fn one_step(&self, theta0: &Vector) -> Result<Vector> {
        one_step_with(&self.system, &self.penalty, theta0)
    }

    pub fn full_fit(&self) -> Result<Vector> {
        coordinate_descent(&self.system, &self.penalty)
    }
}

impl ProfiledCriterion for PartialSplineCriterion {
    fn dim(&self) -> usize {
        self.system.dim()
    }
    fn sample_size(&self) -> usize {
        self.system.n
    }
    fn evaluate(&self, theta: &Vector) -> Result<f64> {
        Ok(-0.5 * penalized_value(&self.system, &self.penalty, theta))
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn gradient(&self, theta: &Vector) -> Result<Vector> {
        let n = self.system.n as f64;
        let mut g = &self.system.cross - &self.system.gram * theta;
        if self.penalty.tau > 0.0 {
            let f = n * self.penalty.tau * self.penalty.tau / 2.0;
            for (j, w) in self.penalty.weights().iter().enumerate() {
                g[j] -= f * w * sign(theta[j]);
            }
        }
        Ok(g)
    }
    fn hessian(&self, _theta: &Vector) -> Result<Matrix> {
        Ok(-&self.system.gram)
    }
    fn post_step(&self, theta: Vector) -> Vector {
        hard_threshold(theta, &self.thresholds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::generate::{generate_plm, PlmDesign};

    fn fixture(n: usize, seed: u64) -> PLMDataset {
        generate_plm(n, &PlmDesign::default().theta0, seed).unwrap()
    }

    #[test]
    fn tau_zero_one_step_is_exact() {
        let data = fixture(120, 3);
        let lambda = 120f64.powf(-0.4);
        let fit = partial_spline_fit(&data, lambda).unwrap();
        let cfg = PenaltyConfig {
            lambda,
            tau: 0.0,
            gamma: 1.0,
            theta_tilde: fit.iter().copied().collect(),
        };
        for start in [Vector::from_element(8, 0.0), Vector::from_element(8, 5.0)] {
            let one = one_step_sparse(&data, &cfg, &start).unwrap();
            assert!((one - &fit).amax() < 1e-10);
        }
        assert!((full_sparse_fit(&data, &cfg).unwrap() - &fit).amax() < 1e-10);
        let at_fit = one_step_sparse(&data, &cfg, &fit).unwrap();
        assert!((at_fit - &fit).amax() < 1e-12);
    }

    #[test]
    fn objective_at_zero_is_profiled_rss() {
        let data = fixture(60, 4);
        let sys = PartialSplineSystem::new(&data, 0.1).unwrap();
        let cfg = PenaltyConfig {
            lambda: 0.1,
            tau: 0.3,
            gamma: 1.0,
            theta_tilde: vec![1.0; 8],
        };
        let v = double_penalty_objective(&data, &cfg, &Vector::zeros(8)).unwrap();
        assert!((v - sys.yy).abs() < 1e-9 * sys.yy.abs());
    }

    #[test]
    fn full_fit_satisfies_kkt() {
        let data = fixture(200, 5);
        let lambda = 200f64.powf(-0.4);
        let tilde = partial_spline_fit(&data, lambda).unwrap();
        let cfg = PenaltyConfig::scaled(200, 1.0, 1.0, tilde.iter().copied().collect());
        let sys = PartialSplineSystem::new(&data, cfg.lambda).unwrap();
        let th = full_sparse_fit(&data, &cfg).unwrap();
        let grad = &sys.cross - &sys.gram * &th;
        let n = 200.0;
        for (j, w) in cfg.weights().iter().enumerate() {
            let half = n * cfg.tau * cfg.tau * w / 2.0;
            if th[j] == 0.0 {
                assert!(grad[j].abs() <= half + 1e-7);
            } else {
                assert!((grad[j] - half * th[j].signum()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_weight_rejected() {
        let data = fixture(30, 6);
        let cfg = PenaltyConfig {
            lambda: 0.1,
            tau: 0.1,
            gamma: 1.0,
            theta_tilde: vec![0.0; 8],
        };
        assert!(double_penalty_objective(&data, &cfg, &Vector::zeros(8)).is_err());
    }
}
