//! Cox proportional hazards model under current status data.
//!
//! For fixed θ the NPMLE of the cumulative hazard maximizes
//! `Σ δ_i log(1 − e^{−Λ(y_i) c_i}) − (1 − δ_i) Λ(y_i) c_i`, `c_i = e^{θ'z_i}`,
//! over nondecreasing Λ. The objective is a sum of concave functions of the
//! values of Λ at the ordered observation times, so the isotonic maximizer
//! is found exactly by pool-adjacent-violators with each pooled block
//! solved in closed form up to a scalar root.

use serde::{Deserialize, Serialize};

use crate::criterion::{ProfiledCriterion, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSDataset {
    pub y: Vec<f64>,
    pub delta: Vec<bool>,
    pub z: Vec<Vec<f64>>,
}

impl CSDataset {
    pub fn new(y: Vec<f64>, delta: Vec<bool>, z: Vec<Vec<f64>>) -> Result<Self> {
        let d = CSDataset { y, delta, z };
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
        self.z.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::domain("empty current-status dataset"));
        }
        if self.delta.len() != n || self.z.len() != n {
            return Err(Error::domain("y, delta and z must have equal lengths"));
        }
        if let Some(y) = self.y.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::domain(format!("examination time {y} must be finite and positive")));
        }
        let d = self.dim();
        if d == 0 || self.z.iter().any(|z| z.len() != d || z.iter().any(|v| !v.is_finite())) {
            return Err(Error::domain("covariates must be finite vectors of one common positive length"));
        }
        Ok(())
    }
}

/// Right-continuous step function: `Λ(y) = values[j]` for `knots[j] <= y < knots[j+1]`,
/// zero before the first knot. Boundary solutions carry `+∞` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneHazard {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl MonotoneHazard {
    pub fn evaluate(&self, y: f64) -> f64 {
        match self.knots.partition_point(|k| *k <= y) {
            0 => 0.0,
            j => self.values[j - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpmleFit {
    pub hazard: MonotoneHazard,
    pub loglik: f64,
    /// Some hazard value is `+∞` (a supremum, not a maximum).
    pub boundary: bool,
}

/// One group of tied observation times: the `c_i` of the events, and the
/// summed `c_i` of the non-events.
#[derive(Debug, Clone, Default)]
struct Block {
    events: Vec<f64>,
    censored_mass: f64,
    /// Number of distinct knots pooled.
    width: usize,
    value: f64,
}

/// Per-block term at Λ = x, with the boundary conventions `x = 0` (no events)
/// and `x = ∞` (no non-events) giving their suprema.
fn block_loglik(events: &[f64], censored_mass: f64, x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let mut s = -censored_mass * x;
    for &c in events {
        // log(1 − e^{−cx}) computed without cancellation
        let cx = c * x;
        s += if cx < std::f64::consts::LN_2 {
            (-(-cx).exp_m1()).ln()
        } else {
            (-(-cx).exp()).ln_1p()
        };
    }
    s
}

/// Maximizer of the block objective: root of `Σ c/(e^{cx} − 1) = C0`.
fn block_argmax(events: &[f64], censored_mass: f64, lo_hint: f64, hi_hint: f64) -> f64 {
    if events.is_empty() {
        return 0.0;
    }
    if censored_mass <= 0.0 {
        return f64::INFINITY;
    }
    let m = events.len() as f64;
    let sum_c: f64 = events.iter().sum();
    // c/(e^{cx}−1) lies in [1/x − c/2, 1/x]
    let mut lo = m / (censored_mass + 0.5 * sum_c);
    let mut hi = m / censored_mass;
    if lo_hint.is_finite() && lo_hint > lo {
        lo = lo_hint.min(hi);
    }
    if hi_hint.is_finite() && hi_hint < hi {
        hi = hi_hint.max(lo);
    }
    let h = |x: f64| -> (f64, f64) {
        let mut v = -censored_mass;
        let mut dv = 0.0;
        for &c in events {
            let em1 = (c * x).exp_m1();
            v += c / em1;
            dv -= c * c * (em1 + 1.0) / (em1 * em1);
        }
        (v, dv)
    };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = h(x);
        if v == 0.0 {
            return x;
        }
        if v > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Computes the NPMLE of Λ and the profile log-likelihood at θ.
pub fn cox_cs_npmle(data: &CSDataset, theta: &Vector) -> Result<NpmleFit> {
    data.validate()?;
    CoxCurrentStatus::new(data.clone())?.npmle(theta)
}

/// `Ŝ_n(θ)` = profile log-likelihood of the current status Cox model.
#[derive(Debug, Clone)]
pub struct CoxCurrentStatus {
    data: CSDataset,
    /// Subject indices sorted by examination time.
    order: Vec<usize>,
    /// Distinct sorted examination times.
    knots: Vec<f64>,
    /// Index into `knots` for each entry of `order`.
    knot_of: Vec<usize>,
    bounds: Option<(Vector, Vector)>,
}

impl CoxCurrentStatus {
    pub fn new(data: CSDataset) -> Result<Self> {
        data.validate()?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.y[a].total_cmp(&data.y[b]).then(a.cmp(&b)));
        let mut knots: Vec<f64> = Vec::new();
        let mut knot_of = Vec::with_capacity(order.len());
        for &i in &order {
            if knots.last() != Some(&data.y[i]) {
                knots.push(data.y[i]);
            }
            knot_of.push(knots.len() - 1);
        }
        Ok(CoxCurrentStatus {
            data,
            order,
            knots,
            knot_of,
            bounds: None,
        })
    }

    pub fn with_bounds(mut self, lower: Vector, upper: Vector) -> Self {
        self.bounds = Some((lower, upper));
        self
    }

    pub fn data(&self) -> &CSDataset {
        &self.data
    }

    pub fn npmle(&self, theta: &Vector) -> Result<NpmleFit> {
        if theta.len() != self.data.dim() {
            return Err(Error::domain(format!(
                "theta has dimension {}, covariates have {}",
                theta.len(),
                self.data.dim()
            )));
        }
        let mut raw: Vec<Block> = vec![Block::default(); self.knots.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            let eta: f64 = self.data.z[i].iter().zip(theta.iter()).map(|(z, t)| z * t).sum();
            let c = eta.exp();
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::eval(None, format!("exp(theta'z) = {c} out of range")));
            }
            let b = &mut raw[self.knot_of[pos]];
            b.width = 1;
            if self.data.delta[i] {
                b.events.push(c);
            } else {
                b.censored_mass += c;
            }
        }
        let mut stack: Vec<Block> = Vec::with_capacity(raw.len());
        for mut b in raw {
            b.value = block_argmax(&b.events, b.censored_mass, f64::NAN, f64::NAN);
            while let Some(top) = stack.last() {
                if top.value <= b.value {
                    break;
                }
                let mut top = stack.pop().expect("non-empty");
                // the pooled maximizer lies between the two block maximizers
                let (lo, hi) = (b.value, top.value);
                if top.events.len() < b.events.len() {
                    std::mem::swap(&mut top.events, &mut b.events);
                }
                top.events.extend_from_slice(&b.events);
                top.censored_mass += b.censored_mass;
                top.width += b.width;
                top.value = block_argmax(&top.events, top.censored_mass, lo, hi);
                b = top;
            }
            stack.push(b);
        }
        let mut values = Vec::with_capacity(self.knots.len());
        let mut loglik = 0.0;
        let mut boundary = false;
        for b in &stack {
            boundary |= b.value.is_infinite();
            loglik += block_loglik(&b.events, b.censored_mass, b.value);
            values.extend(std::iter::repeat_n(b.value, b.width));
        }
        if loglik.is_nan() {
            return Err(Error::eval(None, "NPMLE log-likelihood is NaN"));
        }
        Ok(NpmleFit {
            hazard: MonotoneHazard {
                knots: self.knots.clone(),
                values,
            },
            loglik,
            boundary,
        })
    }
}

impl ProfiledCriterion for CoxCurrentStatus {
    fn dim(&self) -> usize {
        self.data.dim()
    }
    fn sample_size(&self) -> usize {
        self.data.len()
    }
    fn evaluate(&self, theta: &Vector) -> Result<f64> {
        Ok(self.npmle(theta)?.loglik)
    }
    fn bounds(&self) -> Option<(&Vector, &Vector)> {
        self.bounds.as_ref().map(|(a, b)| (a, b))
    }
}

/// Log-likelihood of the current status model at a given hazard.
pub fn cox_cs_loglik(data: &CSDataset, theta: &Vector, hazard: &MonotoneHazard) -> f64 {
    let mut s = 0.0;
    for i in 0..data.len() {
        let eta: f64 = data.z[i].iter().zip(theta.iter()).map(|(z, t)| z * t).sum();
        let x = hazard.evaluate(data.y[i]) * eta.exp();
        s += if data.delta[i] {
            if x.is_infinite() {
                0.0
            } else {
                (-(-x).exp_m1()).ln()
            }
        } else {
            -x
        };
    }
    s
}
