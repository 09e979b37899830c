//! Profiled criteria and the score / information estimators built on them.
//!
//! A [`ProfiledCriterion`] is the generalized profile log-likelihood
//! `Ŝ_n(θ)`: a value to be *maximized*, the nuisance parameter already
//! profiled out. Backends that are naturally minimization problems negate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub trait ProfiledCriterion: Sync {
    /// Dimension `d` of θ.
    fn dim(&self) -> usize;

    /// Sample size `n`.
    fn sample_size(&self) -> usize;

    fn evaluate(&self, theta: &Vector) -> Result<f64>;

    fn has_gradient(&self) -> bool {
        false
    }

    fn has_hessian(&self) -> bool {
        false
    }

    fn gradient(&self, _theta: &Vector) -> Result<Vector> {
        Err(Error::MissingCapability("gradient"))
    }

    fn hessian(&self, _theta: &Vector) -> Result<Matrix> {
        Err(Error::MissingCapability("hessian"))
    }

    /// Optional parameter box; probes that leave it are reflected.
    fn bounds(&self) -> Option<(&Vector, &Vector)> {
        None
    }

    /// Applied to every Newton iterate; identity unless a backend needs to
    /// enforce structure (exact zeros) that a linear update cannot produce.
    fn post_step(&self, theta: Vector) -> Vector {
        theta
    }
}

impl<C: ProfiledCriterion + ?Sized> ProfiledCriterion for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_size(&self) -> usize {
        (**self).sample_size()
    }
    fn evaluate(&self, theta: &Vector) -> Result<f64> {
        (**self).evaluate(theta)
    }
    fn has_gradient(&self) -> bool {
        (**self).has_gradient()
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn gradient(&self, theta: &Vector) -> Result<Vector> {
        (**self).gradient(theta)
    }
    fn hessian(&self, theta: &Vector) -> Result<Matrix> {
        (**self).hessian(theta)
    }
    fn bounds(&self) -> Option<(&Vector, &Vector)> {
        (**self).bounds()
    }
    fn post_step(&self, theta: Vector) -> Vector {
        (**self).post_step(theta)
    }
}

/// How `Î_n` is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoConstruction {
    NumericSecondDiff,
    AnalyticHessian,
    GradientFD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub vector: Vec<f64>,
    /// `s_n`, or `None` when the score is the analytic gradient over `n`.
    pub step_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoEstimate {
    /// Row-major `d × d`.
    pub matrix: Vec<Vec<f64>>,
    /// `[t_n]`, `[t1, t2]`, or empty for the analytic hessian.
    pub steps_used: Vec<f64>,
    pub construction: InfoConstruction,
    /// Ratio of extreme singular values.
    pub condition: f64,
}

impl ScoreEstimate {
    pub fn as_vector(&self) -> Vector {
        Vector::from_column_slice(&self.vector)
    }
}

impl InfoEstimate {
    fn from_matrix(m: Matrix, steps_used: Vec<f64>, construction: InfoConstruction) -> Self {
        let condition = condition_number(&m);
        let matrix = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        InfoEstimate {
            matrix,
            steps_used,
            construction,
            condition,
        }
    }

    pub fn as_matrix(&self) -> Matrix {
        let d = self.matrix.len();
        Matrix::from_fn(d, d, |i, j| self.matrix[i][j])
    }
}

/// `σ_max / σ_min`; infinite for a singular (or empty-spectrum) matrix.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_step(name: &str, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("step {name} = {h} must be positive and finite")));
    }
    Ok(())
}

fn check_dim<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector) -> Result<()> {
    if theta.len() != c.dim() {
        return Err(Error::domain(format!(
            "theta has dimension {}, criterion expects {}",
            theta.len(),
            c.dim()
        )));
    }
    Ok(())
}

/// Direction (+1 or -1) for a probe of size `reach` along coordinate `i`.
fn probe_sign<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector, i: usize, reach: f64) -> f64 {
    match c.bounds() {
        Some((_, hi)) if theta[i] + reach > hi[i] => -1.0,
        _ => 1.0,
    }
}

fn eval_at<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector, coord: Option<usize>) -> Result<f64> {
    let v = c.evaluate(theta).map_err(|e| match e {
        Error::Evaluation { message, .. } => Error::eval(coord, message),
        other => Error::eval(coord, other.to_string()),
    })?;
    if !v.is_finite() {
        return Err(Error::eval(coord, format!("non-finite criterion value {v}")));
    }
    Ok(v)
}

/// Forward-difference score `[Ŝ(θ + s v_i) − Ŝ(θ)] / (n s)`.
pub fn numeric_score<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector, s_n: f64) -> Result<ScoreEstimate> {
    check_step("s_n", s_n)?;
    check_dim(c, theta)?;
    let n = c.sample_size() as f64;
    let f0 = eval_at(c, theta, None)?;
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = probe_sign(c, theta, i, s_n) * s_n;
        let mut probe = theta.clone();
        probe[i] += h;
        let fi = eval_at(c, &probe, Some(i))?;
        out.push((fi - f0) / (n * h));
    }
    Ok(ScoreEstimate {
        vector: out,
        step_used: Some(s_n),
    })
}

/// Second-difference information
/// `−[Ŝ(θ+t(v_i+v_j)) − Ŝ(θ+t v_i) − Ŝ(θ+t v_j) + Ŝ(θ)] / (n t²)`.
pub fn numeric_info<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector, t_n: f64) -> Result<InfoEstimate> {
    check_step("t_n", t_n)?;
    check_dim(c, theta)?;
    let d = theta.len();
    let n = c.sample_size() as f64;
    let h: Vec<f64> = (0..d)
        .map(|i| probe_sign(c, theta, i, 2.0 * t_n) * t_n)
        .collect();
    let f0 = eval_at(c, theta, None)?;
    let mut single = Vec::with_capacity(d);
    for i in 0..d {
        let mut p = theta.clone();
        p[i] += h[i];
        single.push(eval_at(c, &p, Some(i))?);
    }
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut p = theta.clone();
            p[i] += h[i];
            p[j] += h[j];
            let fij = eval_at(c, &p, Some(i))?;
            let v = -(fij - single[i] - single[j] + f0) / (n * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(InfoEstimate::from_matrix(m, vec![t_n], InfoConstruction::NumericSecondDiff))
}

/// Information from finite differences of the analytic gradient at the
/// offsets `n^{-1/2} t1` and `n^{-1/2} t2`, symmetrized.
pub fn gradient_fd_info<C: ProfiledCriterion + ?Sized>(
    c: &C,
    theta: &Vector,
    t1: f64,
    t2: f64,
) -> Result<InfoEstimate> {
    if !c.has_gradient() {
        return Err(Error::MissingCapability("gradient"));
    }
    if !(t1 < t2) || !t1.is_finite() || !t2.is_finite() {
        return Err(Error::domain(format!("need finite t1 < t2, got ({t1}, {t2})")));
    }
    check_dim(c, theta)?;
    let d = theta.len();
    let n = c.sample_size() as f64;
    let root_n = n.sqrt();
    let mut m = Matrix::zeros(d, d);
    for j in 0..d {
        let mut p1 = theta.clone();
        p1[j] += t1 / root_n;
        let mut p2 = theta.clone();
        p2[j] += t2 / root_n;
        let g1 = c.gradient(&p1)?;
        let g2 = c.gradient(&p2)?;
        for i in 0..d {
            m[(i, j)] = -(g2[i] - g1[i]) / (root_n * (t2 - t1));
        }
    }
    let sym = (&m + m.transpose()) * 0.5;
    Ok(InfoEstimate::from_matrix(sym, vec![t1, t2], InfoConstruction::GradientFD))
}

/// `−Ŝ⁽²⁾(θ) / n`.
pub fn analytic_info<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector) -> Result<InfoEstimate> {
    if !c.has_hessian() {
        return Err(Error::MissingCapability("hessian"));
    }
    check_dim(c, theta)?;
    let n = c.sample_size() as f64;
    let h = c.hessian(theta)?;
    let m = (&h + h.transpose()) * (-0.5 / n);
    Ok(InfoEstimate::from_matrix(m, Vec::new(), InfoConstruction::AnalyticHessian))
}

/// `Ŝ⁽¹⁾(θ) / n`.
pub fn analytic_score<C: ProfiledCriterion + ?Sized>(c: &C, theta: &Vector) -> Result<ScoreEstimate> {
    check_dim(c, theta)?;
    let n = c.sample_size() as f64;
    let g = c.gradient(theta)?;
    Ok(ScoreEstimate {
        vector: g.iter().map(|v| v / n).collect(),
        step_used: None,
    })
}

/// `Ŝ(θ) = n (a'θ − θ'Mθ/2)`, with exact derivatives. Handy for checking
/// estimators and the engine, where every finite difference is exact.
#[derive(Debug, Clone)]
pub struct QuadraticCriterion {
    pub n: usize,
    pub linear: Vector,
    pub curvature: Matrix,
    pub bounds: Option<(Vector, Vector)>,
}

impl QuadraticCriterion {
    pub fn new(n: usize, linear: Vector, curvature: Matrix) -> Self {
        QuadraticCriterion {
            n,
            linear,
            curvature,
            bounds: None,
        }
    }

    /// Peaked at `center` with curvature `m`: `Ŝ(θ) = −n (θ−c)'M(θ−c)/2` up to a constant.
    pub fn peaked(n: usize, center: &Vector, m: Matrix) -> Self {
        let linear = &m * center;
        QuadraticCriterion::new(n, linear, m)
    }

    /// Maximizer `M⁻¹ a`.
    pub fn maximizer(&self) -> Option<Vector> {
        self.curvature.clone().lu().solve(&self.linear)
    }
}

impl ProfiledCriterion for QuadraticCriterion {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn sample_size(&self) -> usize {
        self.n
    }
    fn evaluate(&self, theta: &Vector) -> Result<f64> {
        let n = self.n as f64;
        Ok(n * (self.linear.dot(theta) - 0.5 * theta.dot(&(&self.curvature * theta))))
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn gradient(&self, theta: &Vector) -> Result<Vector> {
        Ok((&self.linear - &self.curvature * theta) * self.n as f64)
    }
    fn hessian(&self, _theta: &Vector) -> Result<Matrix> {
        Ok(&self.curvature * -(self.n as f64))
    }
    fn bounds(&self) -> Option<(&Vector, &Vector)> {
        self.bounds.as_ref().map(|(a, b)| (a, b))
    }
}
