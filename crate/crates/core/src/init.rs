//! Grid-search initial estimators: argmax of `Ŝ_n` over a regular lattice
//! or over uniform random draws.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{ProfiledCriterion, Vector};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Largest lattice the deterministic search will enumerate.
pub const MAX_GRID_NODES: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = SearchSpace { lower, upper };
        s.validate()?;
        Ok(s)
    }

    /// The cube `center ± half_width` in every coordinate.
    pub fn cube(center: &[f64], half_width: f64) -> Result<Self> {
        SearchSpace::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Degenerate axes (`lower == upper`) are allowed.
    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::domain("search box bounds must be non-empty and of equal length"));
        }
        for (i, (a, b)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::domain(format!("search box axis {i}: need finite lower <= upper, got [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub psi: Rational,
    /// Deterministic lattice spacing is `side_scale · n^{-ψ}`.
    pub side_scale: f64,
    /// Stochastic search draws `ceil(min_card_scale · n^ψ)` points.
    pub min_card_scale: f64,
    pub seed: u64,
    /// Per-axis lattice shift as a fraction of the spacing, each in `[0, 1)`.
    /// Empty means the lattice is anchored at `lower`.
    #[serde(default)]
    pub offset: Vec<f64>,
}

impl GridSpec {
    pub fn new(psi: Rational, side_scale: f64, min_card_scale: f64, seed: u64) -> Self {
        GridSpec {
            psi,
            side_scale,
            min_card_scale,
            seed,
            offset: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.psi.is_positive() {
            return Err(Error::domain(format!("psi = {} must be positive", self.psi)));
        }
        if !(self.side_scale > 0.0 && self.side_scale.is_finite()) {
            return Err(Error::domain(format!("side_scale = {} must be positive", self.side_scale)));
        }
        if !(self.min_card_scale > 0.0 && self.min_card_scale.is_finite()) {
            return Err(Error::domain(format!("min_card_scale = {} must be positive", self.min_card_scale)));
        }
        if let Some(u) = self.offset.iter().find(|u| !(0.0..1.0).contains(*u)) {
            return Err(Error::domain(format!("lattice offset {u} outside [0, 1)")));
        }
        Ok(())
    }

    pub fn spacing(&self, n: usize) -> f64 {
        self.side_scale * (n as f64).powf(-self.psi.to_f64())
    }

    /// `ceil(C̃ n^ψ)`, with values within rounding noise of an integer taken as that integer.
    pub fn stochastic_count(&self, n: usize) -> usize {
        let x = self.min_card_scale * (n as f64).powf(self.psi.to_f64());
        let r = x.round();
        let c = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
        (c as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub evaluated: usize,
    pub failed: usize,
}

impl SearchResult {
    pub fn as_vector(&self) -> Vector {
        Vector::from_column_slice(&self.theta)
    }
}

/// Lattice coordinates along each axis.
pub fn lattice_axes(space: &SearchSpace, spec: &GridSpec, n: usize) -> Result<Vec<Vec<f64>>> {
    space.validate()?;
    spec.validate()?;
    if !spec.offset.is_empty() && spec.offset.len() != space.dim() {
        return Err(Error::domain("lattice offset length differs from the box dimension"));
    }
    let h = spec.spacing(n);
    let mut axes = Vec::with_capacity(space.dim());
    for i in 0..space.dim() {
        let (a, b) = (space.lower[i], space.upper[i]);
        let start = a + spec.offset.get(i).copied().unwrap_or(0.0) * h;
        let mut axis = Vec::new();
        if start > b {
            axis.push(a);
        } else {
            let steps = ((b - start) / h + 1e-9).floor() as u64;
            for j in 0..=steps {
                axis.push((start + j as f64 * h).min(b));
            }
        }
        axes.push(axis);
    }
    let total = axes.iter().try_fold(1u64, |acc, a| acc.checked_mul(a.len() as u64));
    match total {
        Some(t) if t <= MAX_GRID_NODES => Ok(axes),
        _ => Err(Error::domain(format!(
            "lattice with spacing {h:.3e} exceeds {MAX_GRID_NODES} nodes"
        ))),
    }
}

fn lattice_node(axes: &[Vec<f64>], mut index: usize) -> Vector {
    let d = axes.len();
    let mut v = Vector::zeros(d);
    for i in (0..d).rev() {
        let len = axes[i].len();
        v[i] = axes[i][index % len];
        index /= len;
    }
    v
}

fn lex_less(a: &Vector, b: &Vector) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

#[derive(Clone)]
struct Best {
    theta: Vector,
    value: f64,
    evaluated: usize,
    failed: usize,
}

fn merge(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let (evaluated, failed) = (a.evaluated + b.evaluated, a.failed + b.failed);
            let keep_a = a.value > b.value || (a.value == b.value && !lex_less(&b.theta, &a.theta));
            let mut w = if keep_a { a } else { b };
            w.evaluated = evaluated;
            w.failed = failed;
            Some(w)
        }
    }
}

fn argmax<C, F>(c: &C, count: usize, node: F) -> Result<SearchResult>
where
    C: ProfiledCriterion + ?Sized,
    F: Fn(usize) -> Vector + Sync,
{
    let best = (0..count)
        .into_par_iter()
        .map(|i| {
            let theta = node(i);
            match c.evaluate(&theta) {
                Ok(v) if !v.is_nan() => Some(Best {
                    theta,
                    value: v,
                    evaluated: 1,
                    failed: 0,
                }),
                Ok(_) | Err(_) => {
                    log::debug!("grid node {i} skipped: criterion failed");
                    Some(Best {
                        theta,
                        value: f64::NAN,
                        evaluated: 1,
                        failed: 1,
                    })
                }
            }
        })
        .map(|b| match b {
            Some(b) if b.failed == 1 => Some(Best {
                value: f64::NEG_INFINITY,
                ..b
            }),
            other => other,
        })
        .reduce(|| None, merge)
        .expect("at least one node");
    if best.failed == best.evaluated {
        return Err(Error::eval(None, format!("criterion failed at all {} search nodes", best.evaluated)));
    }
    if best.failed > 0 {
        log::info!("{} of {} search nodes failed and were skipped", best.failed, best.evaluated);
    }
    Ok(SearchResult {
        theta: best.theta.iter().copied().collect(),
        value: best.value,
        evaluated: best.evaluated,
        failed: best.failed,
    })
}

/// Argmax of `Ŝ_n` over the lattice with spacing `s n^{-ψ}` anchored at
/// `lower` (shifted by `spec.offset`). Ties go to the lexicographically
/// smallest node.
pub fn deterministic_search<C: ProfiledCriterion + ?Sized>(
    c: &C,
    space: &SearchSpace,
    spec: &GridSpec,
    n: usize,
) -> Result<SearchResult> {
    if space.dim() != c.dim() {
        return Err(Error::domain("search box dimension differs from the criterion"));
    }
    let axes = lattice_axes(space, spec, n)?;
    let total: usize = axes.iter().map(Vec::len).product();
    argmax(c, total, |i| lattice_node(&axes, i))
}

/// Argmax of `Ŝ_n` over `ceil(C̃ n^ψ)` uniform draws on the box.
pub fn stochastic_search<C: ProfiledCriterion + ?Sized, R: Rng + ?Sized>(
    c: &C,
    space: &SearchSpace,
    spec: &GridSpec,
    n: usize,
    rng: &mut R,
) -> Result<SearchResult> {
    space.validate()?;
    spec.validate()?;
    if space.dim() != c.dim() {
        return Err(Error::domain("search box dimension differs from the criterion"));
    }
    let count = spec.stochastic_count(n);
    let nodes: Vec<Vector> = (0..count)
        .map(|_| {
            Vector::from_iterator(
                space.dim(),
                space
                    .lower
                    .iter()
                    .zip(&space.upper)
                    .map(|(a, b)| if a == b { *a } else { a + rng.random::<f64>() * (b - a) }),
            )
        })
        .collect();
    argmax(c, count, |i| nodes[i].clone())
}
