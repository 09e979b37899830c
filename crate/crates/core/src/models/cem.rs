//! Conditionally parametric models with a kernel-estimated nuisance:
//! `Y | W, Z ~ N(θ'W, η(Z))` or `Y | W, Z ~ Exp(mean e^{θ'W + η(Z)})`.
//!
//! For fixed θ the nuisance is the Nadaraya–Watson average of
//! `ψ_θ(Y, W)` mapped through `ρ`: `((Y − θ'W)², identity)` in the normal
//! case and `(Y e^{−θ'W}, log)` in the exponential case.

use serde::{Deserialize, Serialize};

use crate::criterion::{Matrix, ProfiledCriterion, Vector};
use crate::error::{Error, Result};
use crate::rational::{q, Rational};

/// Lower clamp for the normal-variant variance estimate.
pub const ETA_FLOOR: f64 = 1e-8;
/// Largest tolerated fraction of clamped variance estimates.
pub const MAX_CLAMPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CemVariant {
    ConditionalNormal,
    ConditionalExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEMDataset {
    pub y: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub variant: CemVariant,
}

impl CEMDataset {
    pub fn new(y: Vec<f64>, w: Vec<Vec<f64>>, z: Vec<f64>, variant: CemVariant) -> Result<Self> {
        let d = CEMDataset { y, w, z, variant };
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
        if n == 0 {
            return Err(Error::domain("empty dataset"));
        }
        if self.w.len() != n || self.z.len() != n {
            return Err(Error::domain("y, w and z must have equal lengths"));
        }
        let d = self.dim();
        if d == 0 || self.w.iter().any(|r| r.len() != d) {
            return Err(Error::domain("covariate rows must share one positive length"));
        }
        if self.variant == CemVariant::ConditionalExponential && self.y.iter().any(|y| !(*y > 0.0)) {
            return Err(Error::domain("exponential responses must be positive"));
        }
        Ok(())
    }

    fn psi(&self, theta: &Vector, i: usize) -> f64 {
        let lin: f64 = self.w[i].iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
        match self.variant {
            CemVariant::ConditionalNormal => (self.y[i] - lin).powi(2),
            CemVariant::ConditionalExponential => self.y[i] * (-lin).exp(),
        }
    }
}

/// Gaussian kernel with bandwidth `b_n = c n^{-α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub bandwidth_constant: f64,
    pub alpha: Rational,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            bandwidth_constant: 1.0,
            alpha: q(1, 5),
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_constant > 0.0 && self.bandwidth_constant.is_finite()) {
            return Err(Error::domain(format!(
                "bandwidth constant {} must be positive",
                self.bandwidth_constant
            )));
        }
        if !(self.alpha.is_positive() && self.alpha < 1) {
            return Err(Error::domain(format!("bandwidth exponent {} must lie in (0, 1)", self.alpha)));
        }
        Ok(())
    }

    /// Checks `1/8 < α < (q − 2)/(4q + 16)` for a kernel smoothness `q`.
    pub fn validate_for(&self, q_order: u32) -> Result<()> {
        self.validate()?;
        let hi = Rational::new(q_order as i64 - 2, 4 * q_order as i64 + 16);
        if !(self.alpha > q(1, 8) && self.alpha < hi) {
            return Err(Error::domain(format!("bandwidth exponent {} outside (1/8, {hi})", self.alpha)));
        }
        Ok(())
    }

    pub fn bandwidth(&self, n: usize) -> f64 {
        self.bandwidth_constant * (n as f64).powf(-self.alpha.to_f64())
    }
}

fn kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// `η̂(θ)(z) = ρ(Σ ψ_θ(Y_i, W_i) K((z − Z_i)/b) / Σ K((z − Z_i)/b))`.
pub fn cem_nuisance(data: &CEMDataset, spec: &KernelSpec, theta: &Vector, z: f64) -> Result<f64> {
    data.validate()?;
    spec.validate()?;
    let b = spec.bandwidth(data.len());
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..data.len() {
        let k = kernel((z - data.z[i]) / b);
        num += k * data.psi(theta, i);
        den += k;
    }
    if !(den > 0.0) {
        return Err(Error::eval(None, format!("zero kernel mass at z = {z}")));
    }
    let avg = num / den;
    Ok(match data.variant {
        CemVariant::ConditionalNormal => avg,
        CemVariant::ConditionalExponential => avg.ln(),
    })
}

/// Normalized kernel weights `p_jl` for row `j`.
fn weight_row(z: &[f64], j: usize, b: f64, out: &mut [f64]) -> Result<()> {
    let mut s = 0.0;
    for (l, zl) in z.iter().enumerate() {
        let k = kernel((z[j] - zl) / b);
        out[l] = k;
        s += k;
    }
    if !(s > 0.0) {
        return Err(Error::eval(None, format!("zero kernel mass at z = {}", z[j])));
    }
    for v in out.iter_mut() {
        *v /= s;
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Precomputed {
    /// Per point: `m0 = Σ p Y²`, `m1 = Σ p Y W`, `m2 = Σ p W W'`, so that
    /// `η̂_j(θ) = m0 − 2θ'm1 + θ'm2 θ`.
    Normal { m0: Vec<f64>, m1: Vec<Vector>, m2: Vec<Matrix> },
    /// Dense weights, row `j` in `p[j]`.
    Exponential { p: Vec<Vec<f64>> },
}

/// Plug-in log-likelihood `Ŝ_n(θ) = Σ log lik(θ, η̂(θ)(Z_i); Y_i, W_i)`.
#[derive(Debug, Clone)]
pub struct CemCriterion {
    data: CEMDataset,
    spec: KernelSpec,
    w: Vec<Vector>,
    pre: Precomputed,
}

struct NormalTerms {
    e: f64,
    eta: f64,
    a: Vector,
    clamped: bool,
}

impl CemCriterion {
    pub fn new(data: CEMDataset, spec: KernelSpec) -> Result<Self> {
        data.validate()?;
        spec.validate()?;
        let n = data.len();
        let d = data.dim();
        let b = spec.bandwidth(n);
        let w: Vec<Vector> = data.w.iter().map(|r| Vector::from_column_slice(r)).collect();
        let mut row = vec![0.0; n];
        let pre = match data.variant {
            CemVariant::ConditionalNormal => {
                let mut m0 = Vec::with_capacity(n);
                let mut m1 = Vec::with_capacity(n);
                let mut m2 = Vec::with_capacity(n);
                for j in 0..n {
                    weight_row(&data.z, j, b, &mut row)?;
                    let mut a0 = 0.0;
                    let mut a1 = Vector::zeros(d);
                    let mut a2 = Matrix::zeros(d, d);
                    for l in 0..n {
                        let p = row[l];
                        let yl = data.y[l];
                        a0 += p * yl * yl;
                        a1.axpy(p * yl, &w[l], 1.0);
                        a2.ger(p, &w[l], &w[l], 1.0);
                    }
                    m0.push(a0);
                    m1.push(a1);
                    m2.push(a2);
                }
                Precomputed::Normal { m0, m1, m2 }
            }
            CemVariant::ConditionalExponential => {
                let mut p = Vec::with_capacity(n);
                for j in 0..n {
                    weight_row(&data.z, j, b, &mut row)?;
                    p.push(row.clone());
                }
                Precomputed::Exponential { p }
            }
        };
        Ok(CemCriterion { data, spec, w, pre })
    }

    pub fn data(&self) -> &CEMDataset {
        &self.data
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn check_theta(&self, theta: &Vector) -> Result<()> {
        if theta.len() != self.data.dim() {
            return Err(Error::domain(format!(
                "theta has dimension {}, covariates have {}",
                theta.len(),
                self.data.dim()
            )));
        }
        Ok(())
    }

    fn normal_terms(&self, theta: &Vector) -> Result<Vec<NormalTerms>> {
        let Precomputed::Normal { m0, m1, m2 } = &self.pre else {
            unreachable!("normal variant")
        };
        let n = self.data.len();
        let mut out = Vec::with_capacity(n);
        let mut clamped = 0usize;
        for j in 0..n {
            let m2t = &m2[j] * theta;
            let raw = m0[j] - 2.0 * theta.dot(&m1[j]) + theta.dot(&m2t);
            let e = self.data.y[j] - theta.dot(&self.w[j]);
            if raw < ETA_FLOOR || !raw.is_finite() {
                clamped += 1;
                out.push(NormalTerms {
                    e,
                    eta: ETA_FLOOR,
                    a: Vector::zeros(theta.len()),
                    clamped: true,
                });
            } else {
                out.push(NormalTerms {
                    e,
                    eta: raw,
                    a: (m2t - &m1[j]) * 2.0,
                    clamped: false,
                });
            }
        }
        if clamped as f64 > MAX_CLAMPED_FRACTION * n as f64 {
            return Err(Error::eval(
                None,
                format!("variance estimate nonpositive at {clamped} of {n} points"),
            ));
        }
        Ok(out)
    }

    /// `(ψ_l, m_j, a_j)` for the exponential variant.
    fn exponential_terms(&self, theta: &Vector) -> Result<(Vec<f64>, Vec<f64>, Vec<Vector>)> {
        let Precomputed::Exponential { p } = &self.pre else {
            unreachable!("exponential variant")
        };
        let n = self.data.len();
        let psi: Vec<f64> = (0..n).map(|i| self.data.psi(theta, i)).collect();
        let mut m = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for row in p {
            let mut mj = 0.0;
            let mut aj = Vector::zeros(theta.len());
            for l in 0..n {
                let v = row[l] * psi[l];
                mj += v;
                aj.axpy(-v, &self.w[l], 1.0);
            }
            if !(mj > 0.0 && mj.is_finite()) {
                return Err(Error::eval(None, format!("nuisance average {mj} not positive")));
            }
            m.push(mj);
            a.push(aj);
        }
        Ok((psi, m, a))
    }
}

impl ProfiledCriterion for CemCriterion {
    fn dim(&self) -> usize {
        self.data.dim()
    }
    fn sample_size(&self) -> usize {
        self.data.len()
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn has_hessian(&self) -> bool {
        true
    }

    fn evaluate(&self, theta: &Vector) -> Result<f64> {
        self.check_theta(theta)?;
        match self.data.variant {
            CemVariant::ConditionalNormal => {
                let terms = self.normal_terms(theta)?;
                Ok(-0.5 * terms.iter().map(|t| t.e * t.e / t.eta + t.eta.ln()).sum::<f64>())
            }
            CemVariant::ConditionalExponential => {
                let (psi, m, _) = self.exponential_terms(theta)?;
                let mut s = 0.0;
                for j in 0..psi.len() {
                    s += -theta.dot(&self.w[j]) - m[j].ln() - psi[j] / m[j];
                }
                Ok(s)
            }
        }
    }

    fn gradient(&self, theta: &Vector) -> Result<Vector> {
        self.check_theta(theta)?;
        let d = theta.len();
        let mut g = Vector::zeros(d);
        match self.data.variant {
            CemVariant::ConditionalNormal => {
                for (t, w) in self.normal_terms(theta)?.iter().zip(&self.w) {
                    g.axpy(t.e / t.eta, w, 1.0);
                    if !t.clamped {
                        let c = t.e * t.e / (t.eta * t.eta) - 1.0 / t.eta;
                        g.axpy(0.5 * c, &t.a, 1.0);
                    }
                }
            }
            CemVariant::ConditionalExponential => {
                let (psi, m, a) = self.exponential_terms(theta)?;
                for j in 0..psi.len() {
                    let w = &self.w[j];
                    g.axpy(-1.0 + psi[j] / m[j], w, 1.0);
                    g.axpy(-1.0 / m[j] + psi[j] / (m[j] * m[j]), &a[j], 1.0);
                }
            }
        }
        Ok(g)
    }

    fn hessian(&self, theta: &Vector) -> Result<Matrix> {
        self.check_theta(theta)?;
        let d = theta.len();
        let mut h = Matrix::zeros(d, d);
        match self.data.variant {
            CemVariant::ConditionalNormal => {
                let Precomputed::Normal { m2, .. } = &self.pre else {
                    unreachable!()
                };
                for (j, t) in self.normal_terms(theta)?.iter().enumerate() {
                    let w = &self.w[j];
                    let (e, eta) = (t.e, t.eta);
                    h.ger(-1.0 / eta, w, w, 1.0);
                    if t.clamped {
                        continue;
                    }
                    let a = &t.a;
                    h.ger(-e / (eta * eta), w, a, 1.0);
                    h.ger(-e / (eta * eta), a, w, 1.0);
                    h.ger(-e * e / eta.powi(3) + 0.5 / (eta * eta), a, a, 1.0);
                    let c = e * e / (eta * eta) - 1.0 / eta;
                    // B_j = 2 m2_j
                    h += &m2[j] * c;
                }
            }
            CemVariant::ConditionalExponential => {
                let Precomputed::Exponential { p } = &self.pre else {
                    unreachable!()
                };
                let (psi, m, a) = self.exponential_terms(theta)?;
                let n = psi.len();
                for j in 0..n {
                    let mut bj = Matrix::zeros(d, d);
                    for l in 0..n {
                        bj.ger(p[j][l] * psi[l], &self.w[l], &self.w[l], 1.0);
                    }
                    let (mj, pj, w, aj) = (m[j], psi[j], &self.w[j], &a[j]);
                    h += &bj * (-1.0 / mj + pj / (mj * mj));
                    h.ger(1.0 / (mj * mj) - 2.0 * pj / mj.powi(3), aj, aj, 1.0);
                    h.ger(-pj / mj, w, w, 1.0);
                    h.ger(-pj / (mj * mj), w, aj, 1.0);
                    h.ger(-pj / (mj * mj), aj, w, 1.0);
                }
            }
        }
        Ok(h)
    }
}
