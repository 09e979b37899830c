//! Monte Carlo harness: simulate, fit, and compare empirical error rates
//! with the planned exponents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{analytic_info, ProfiledCriterion, Vector};
use crate::engine::{self, KStepConfig, KStepTrajectory};
use crate::error::{Error, Result};
use crate::init::{deterministic_search, stochastic_search, GridSpec, SearchSpace};
use crate::models::cem::{CemCriterion, KernelSpec};
use crate::models::cox_cs::CoxCurrentStatus;
use crate::models::generate::generate;
use crate::models::plm::{PartialSplineCriterion, PartialSplineSystem, PenaltyConfig};
use crate::models::{ModelDataset, ModelKind};
use crate::rates::{RatePlan, Regime};
use crate::rational::Rational;

pub const REPORT_SCHEMA: u32 = 1;
/// Replication failures above this fraction fail the run.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "KSTEP_THREADS";

/// `θ₀ + n^{-ψ} u` with `u` uniform on the unit sphere.
pub fn oracle_initializer<R: Rng + ?Sized>(theta0: &[f64], psi: &Rational, n: usize, rng: &mut R) -> Result<Vector> {
    if !(psi.is_positive() && *psi <= Rational::half()) {
        return Err(Error::domain(format!("psi = {psi} must lie in (0, 1/2]")));
    }
    let d = theta0.len();
    let u = loop {
        let g = Vector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let norm = g.norm();
        if norm > 1e-300 {
            break g / norm;
        }
    };
    let radius = (n as f64).powf(-psi.to_f64());
    Ok(Vector::from_column_slice(theta0) + u * radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    /// `θ₀ + n^{-ψ} u`.
    Oracle,
    DeterministicGrid,
    StochasticGrid,
    /// Unpenalized partial spline fit (partial linear model only).
    PartialSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub method: InitMethod,
    pub psi: Rational,
    #[serde(default = "one")]
    pub side_scale: f64,
    #[serde(default = "two")]
    pub min_card_scale: f64,
    /// Search box is `θ₀ ± half_width`.
    #[serde(default = "one")]
    pub half_width: f64,
    /// Shift the deterministic lattice by a uniform random fraction of its
    /// spacing in each replication.
    #[serde(default = "yes")]
    pub jitter: bool,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn yes() -> bool {
    true
}

impl InitSpec {
    pub fn oracle(psi: Rational) -> Self {
        InitSpec {
            method: InitMethod::Oracle,
            psi,
            side_scale: 1.0,
            min_card_scale: 2.0,
            half_width: 1.0,
            jitter: true,
        }
    }
}

/// Scalings `λ = λ₀ n^{-2/5}`, `τ = τ₀ n^{-2/5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyScaling {
    pub lambda0: f64,
    pub tau0: f64,
}

impl Default for PenaltyScaling {
    fn default() -> Self {
        PenaltyScaling {
            lambda0: 1.0,
            tau0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub theta0: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub init: InitSpec,
    pub engine: KStepConfig,
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub penalty: PenaltyScaling,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
}

fn default_slope_tolerance() -> f64 {
    0.2
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.replications < 50 {
            log::warn!("{} replications: rate fits will be noisy", self.replications);
        }
        if self.n_grid.len() < 2 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid needs >= 2 strictly increasing sizes".into()));
        }
        if self.n_grid[0] < 3 {
            return Err(Error::Config("sample sizes must be >= 3".into()));
        }
        if self.theta0.is_empty() {
            return Err(Error::Config("theta0 must be non-empty".into()));
        }
        if !(self.slope_tolerance >= 0.0) {
            return Err(Error::Config("slope_tolerance must be >= 0".into()));
        }
        self.engine.validate()?;
        let smooth_model = matches!(self.model, ModelKind::CemNormal | ModelKind::CemExponential | ModelKind::Plm);
        if smooth_model == (self.engine.regime == Regime::Profile) {
            return Err(Error::Config(format!(
                "regime {:?} does not fit model {}",
                self.engine.regime,
                self.model.tag()
            )));
        }
        if self.init.method == InitMethod::PartialSpline && self.model != ModelKind::Plm {
            return Err(Error::Config("partial-spline initializer needs the plm model".into()));
        }
        if self.model == ModelKind::CoxCs && self.theta0.len() > 2 {
            return Err(Error::Config("cox reference search supports d <= 2".into()));
        }
        RatePlan::new(self.engine.regime, &self.engine.psi, &self.engine.nuisance_rate, self.engine.k_max)?;
        Ok(())
    }
}

/// Config schema understood by [`load_experiment_config`].
pub const EXPERIMENT_SCHEMA: u32 = 1;

/// Parses and validates an experiment config. An optional top-level
/// `schema` key must equal [`EXPERIMENT_SCHEMA`].
pub fn load_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(v) = obj.remove("schema") {
            if v.as_u64() != Some(EXPERIMENT_SCHEMA as u64) {
                return Err(Error::Config(format!("schema {v} unsupported (expected {EXPERIMENT_SCHEMA})")));
            }
        }
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for replication `rep` at sample size `n`: `seed ⊕ hash(rep, n)`.
pub fn replication_seed(seed: u64, rep: usize, n: usize) -> u64 {
    seed ^ splitmix64(splitmix64(rep as u64) ^ (n as u64).rotate_left(32))
}

/// Quantiles with linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        })
    }
}

pub fn median(values: &[f64]) -> f64 {
    Quartiles::of(values).map_or(f64::NAN, |q| q.median)
}

/// OLS slope of `log err` on `log n` and its standard error. A nonpositive
/// error gives the sentinel slope `−∞`.
pub fn fit_rate_slope(points: &[(usize, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::domain("rate fit needs at least two points"));
    }
    if points.iter().any(|(_, e)| !(*e > 0.0)) {
        return Ok((f64::NEG_INFINITY, f64::NAN));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate fit needs distinct sample sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let stderr = if xs.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok((slope, stderr))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// One replication at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub rep: usize,
    pub n: usize,
    pub reference: Vec<f64>,
    /// Newton residual `‖Ŝ'/n‖` (smooth) or final search width (Cox).
    pub reference_quality: f64,
    pub iterates: Vec<Vec<f64>>,
    pub err_reference: Vec<f64>,
    pub err_truth: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub rep: usize,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub k: usize,
    pub count: usize,
    pub err_reference: Quartiles,
    pub err_truth: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub k: usize,
    /// `None` when some median error is exactly zero.
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    /// Planned exponent `r_k` (`None` for the initial estimate).
    pub predicted_exponent: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub plan: RatePlan,
    pub cells: Vec<Cell>,
    pub fitted_slopes: Vec<SlopeFit>,
    pub comparisons: Vec<Comparison>,
    pub failure_count: usize,
    pub failures: Vec<Failure>,
    /// Worst reference quality seen at each `n`.
    pub reference_quality: Vec<(usize, f64)>,
    pub replicates: Vec<Replicate>,
}

impl MonteCarloReport {
    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn cell(&self, n: usize, k: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.n == n && c.k == k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-(n, k) quartiles.
    pub fn medians_csv(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        wr.write_record([
            "n",
            "k",
            "count",
            "err_ref_q1",
            "err_ref_median",
            "err_ref_q3",
            "err_truth_q1",
            "err_truth_median",
            "err_truth_q3",
        ])?;
        for c in &self.cells {
            let f = |v: f64| format!("{v:e}");
            wr.write_record([
                c.n.to_string(),
                c.k.to_string(),
                c.count.to_string(),
                f(c.err_reference.q1),
                f(c.err_reference.median),
                f(c.err_reference.q3),
                f(c.err_truth.q1),
                f(c.err_truth.median),
                f(c.err_truth.q3),
            ])?;
        }
        let bytes = wr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }
}

/// Search width below which the Cox reference refinement stops.
pub const COX_REFERENCE_WIDTH: f64 = 1e-4;
/// Newton residual required of smooth references.
pub const SMOOTH_REFERENCE_RESIDUAL: f64 = 1e-8;

/// Maximizer over `θ₀ ± 1` by successive grid refinement; returns the
/// point and the final grid spacing.
pub fn grid_refine_reference<C: ProfiledCriterion + ?Sized>(c: &C, theta0: &[f64]) -> Result<(Vector, f64)> {
    let d = theta0.len();
    let mut center = Vector::from_column_slice(theta0);
    let mut half: f64 = 1.0;
    let mut step: f64 = 0.05;
    loop {
        let per_axis = (2.0 * half / step).round() as usize + 1;
        let total = per_axis.pow(d as u32);
        let mut best: Option<(f64, Vector)> = None;
        for idx in 0..total {
            let mut t = center.clone();
            let mut r = idx;
            for i in 0..d {
                t[i] += -half + (r % per_axis) as f64 * step;
                r /= per_axis;
            }
            if let Ok(v) = c.evaluate(&t) {
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, t));
                }
            }
        }
        let (_, b) = best.ok_or_else(|| Error::eval(None, "reference search failed at every node"))?;
        center = b;
        if step < COX_REFERENCE_WIDTH {
            return Ok((center, step));
        }
        half = 2.0 * step;
        step /= 10.0;
    }
}

/// Newton with the analytic hessian from `start` until `‖Ŝ'/n‖` is small.
pub fn newton_reference<C: ProfiledCriterion + ?Sized>(c: &C, start: &[f64]) -> Result<(Vector, f64)> {
    let n = c.sample_size() as f64;
    let mut theta = Vector::from_column_slice(start);
    for _ in 0..100 {
        let g = c.gradient(&theta)? / n;
        let res = g.norm();
        if res < SMOOTH_REFERENCE_RESIDUAL {
            return Ok((theta, res));
        }
        let info = analytic_info(c, &theta)?.as_matrix();
        let step = info.lu().solve(&g).ok_or(Error::Singular {
            condition: f64::INFINITY,
            step: None,
        })?;
        theta += step;
        if theta.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: 100,
        message: "reference Newton iteration".into(),
    })
}

/// Criterion for a dataset, with the partial spline system when the model is
/// the partial linear one. Penalty levels scale as `n^{-2/5}`, and the penalty
/// weights use the unpenalized partial spline fit.
pub fn build_criterion(
    data: ModelDataset,
    kernel: &KernelSpec,
    penalty: &PenaltyScaling,
) -> Result<(Box<dyn ProfiledCriterion>, Option<PartialSplineSystem>)> {
    Ok(match data {
        ModelDataset::CoxCs(d) => (Box::new(CoxCurrentStatus::new(d)?), None),
        ModelDataset::Cem(d) => (Box::new(CemCriterion::new(d, kernel.clone())?), None),
        ModelDataset::Plm(d) => {
            let scale = (d.len() as f64).powf(-0.4);
            let sys = PartialSplineSystem::new(&d, penalty.lambda0 * scale)?;
            let pen = plm_penalty(&sys, penalty)?;
            (
                Box::new(PartialSplineCriterion::from_system(sys.clone(), pen)?),
                Some(sys),
            )
        }
    })
}

pub(crate) fn plm_penalty(sys: &PartialSplineSystem, penalty: &PenaltyScaling) -> Result<PenaltyConfig> {
    let tilde = sys.unpenalized_fit()?;
    Ok(PenaltyConfig {
        lambda: sys.lambda,
        tau: penalty.tau0 * (sys.n as f64).powf(-0.4),
        gamma: 1.0,
        theta_tilde: tilde.iter().copied().collect(),
    })
}

fn run_one(cfg: &ExperimentConfig, rep: usize, n: usize) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, rep, n));
    let data = generate(cfg.model, n, &cfg.theta0, rng.random())?;
    let (crit, plm_sys) = build_criterion(data, &cfg.kernel, &cfg.penalty)?;
    let c = crit.as_ref();
    let (reference, quality) = match cfg.model {
        ModelKind::CoxCs => grid_refine_reference(c, &cfg.theta0)?,
        ModelKind::CemNormal | ModelKind::CemExponential => newton_reference(c, &cfg.theta0)?,
        ModelKind::Plm => {
            let sys = plm_sys.as_ref().expect("plm system");
            let pen = plm_penalty(sys, &cfg.penalty)?;
            (PartialSplineCriterion::from_system(sys.clone(), pen)?.full_fit()?, 0.0)
        }
    };
    let space = SearchSpace::cube(&cfg.theta0, cfg.init.half_width)?;
    let mut spec = GridSpec::new(cfg.init.psi.clone(), cfg.init.side_scale, cfg.init.min_card_scale, cfg.seed);
    let start = match cfg.init.method {
        InitMethod::Oracle => oracle_initializer(&cfg.theta0, &cfg.init.psi, n, &mut rng)?,
        InitMethod::DeterministicGrid => {
            if cfg.init.jitter {
                spec.offset = (0..cfg.theta0.len()).map(|_| rng.random::<f64>()).collect();
            }
            deterministic_search(c, &space, &spec, n)?.as_vector()
        }
        InitMethod::StochasticGrid => stochastic_search(c, &space, &spec, n, &mut rng)?.as_vector(),
        InitMethod::PartialSpline => plm_sys.as_ref().expect("validated").unpenalized_fit()?,
    };
    let traj: KStepTrajectory = engine::run(c, &start, &cfg.engine)?;
    if let Some(f) = &traj.failure {
        return Err(Error::eval(None, f.clone()));
    }
    let truth = Vector::from_column_slice(&cfg.theta0);
    let mut err_reference = Vec::new();
    let mut err_truth = Vec::new();
    for it in &traj.iterates {
        let v = Vector::from_column_slice(it);
        err_reference.push((&v - &reference).norm());
        err_truth.push((&v - &truth).norm());
    }
    Ok(Replicate {
        rep,
        n,
        reference: reference.iter().copied().collect(),
        reference_quality: quality,
        iterates: traj.iterates,
        err_reference,
        err_truth,
        diverged: traj.diverged,
    })
}

/// Worker count from `KSTEP_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|v| *v > 0)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let plan = RatePlan::new(cfg.engine.regime, &cfg.engine.psi, &cfg.engine.nuisance_rate, cfg.engine.k_max)?;
    let tasks: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let work = || -> Vec<Result<Replicate>> { tasks.par_iter().map(|&(n, r)| run_one(cfg, r, n)).collect() };
    let outcomes = match thread_cap() {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (&(n, rep), out) in tasks.iter().zip(outcomes) {
        match out {
            Ok(r) => replicates.push(r),
            Err(e) => {
                log::warn!("replication {rep} at n = {n} failed: {e}");
                failures.push(Failure {
                    rep,
                    n,
                    message: e.to_string(),
                })
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * tasks.len() as f64 {
        return Err(Error::eval(
            None,
            format!("{} of {} replications failed", failures.len(), tasks.len()),
        ));
    }
    Ok(summarize(cfg, plan, replicates, failures))
}

fn summarize(cfg: &ExperimentConfig, plan: RatePlan, replicates: Vec<Replicate>, failures: Vec<Failure>) -> MonteCarloReport {
    let k_len = plan.exponents.len() + 1;
    let mut cells = Vec::new();
    let mut reference_quality = Vec::new();
    for &n in &cfg.n_grid {
        let at_n: Vec<&Replicate> = replicates.iter().filter(|r| r.n == n).collect();
        reference_quality.push((n, at_n.iter().map(|r| r.reference_quality).fold(0.0, f64::max)));
        for k in 0..k_len {
            let er: Vec<f64> = at_n.iter().filter_map(|r| r.err_reference.get(k).copied()).collect();
            let et: Vec<f64> = at_n.iter().filter_map(|r| r.err_truth.get(k).copied()).collect();
            if let (Some(a), Some(b)) = (Quartiles::of(&er), Quartiles::of(&et)) {
                cells.push(Cell {
                    n,
                    k,
                    count: er.len(),
                    err_reference: a,
                    err_truth: b,
                });
            }
        }
    }
    let mut fitted_slopes = Vec::new();
    let mut comparisons = Vec::new();
    for k in 0..k_len {
        let pts: Vec<(usize, f64)> = cells
            .iter()
            .filter(|c| c.k == k)
            .map(|c| (c.n, c.err_reference.median))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let (slope, se) = fit_rate_slope(&pts).unwrap_or((f64::NAN, f64::NAN));
        let predicted = if k == 0 {
            Some(cfg.init.psi.clone()).filter(|_| cfg.init.method == InitMethod::Oracle)
        } else {
            plan.exponents.get(k - 1).cloned()
        };
        if let Some(p) = &predicted {
            // rates are upper bounds on the error: the fitted slope may be steeper
            let bound = -p.to_f64() + cfg.slope_tolerance;
            comparisons.push(Comparison {
                name: format!("slope k={k} <= -{p} + tol"),
                observed: slope,
                bound,
                tolerance: cfg.slope_tolerance,
                pass: slope <= bound,
            });
        }
        fitted_slopes.push(SlopeFit {
            k,
            slope: if slope == f64::NEG_INFINITY { None } else { finite(slope) },
            stderr: finite(se),
            predicted_exponent: predicted,
        });
    }
    let strict = cfg.engine.regime != Regime::Profile;
    let k_limit = (plan.k_star as usize).min(k_len - 1);
    for &n in &cfg.n_grid {
        for k in 0..k_limit {
            let (Some(a), Some(b)) = (
                cells.iter().find(|c| c.n == n && c.k == k),
                cells.iter().find(|c| c.n == n && c.k == k + 1),
            ) else {
                continue;
            };
            let (ma, mb) = (a.err_reference.median, b.err_reference.median);
            let pass = if strict { mb < ma || ma <= 1e-12 } else { mb <= ma };
            comparisons.push(Comparison {
                name: format!("median error non-increasing n={n} k={k}->{}", k + 1),
                observed: mb,
                bound: ma,
                tolerance: if strict { 1e-12 } else { 0.0 },
                pass,
            });
        }
    }
    MonteCarloReport {
        schema: REPORT_SCHEMA,
        config: cfg.clone(),
        plan,
        cells,
        fitted_slopes,
        comparisons,
        failure_count: failures.len(),
        failures,
        reference_quality,
        replicates,
    }
}
