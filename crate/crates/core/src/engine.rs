//! The k-step Newton–Raphson iteration
//! `θ⁽ᵏ⁾ = θ⁽ᵏ⁻¹⁾ + Î_n⁻¹ ℓ̂_n` in the profile and smooth regimes.

use serde::{Deserialize, Serialize};

use crate::criterion::{
    analytic_info, analytic_score, gradient_fd_info, numeric_info, numeric_score, InfoConstruction,
    InfoEstimate, ProfiledCriterion, ScoreEstimate, Vector,
};
use crate::error::{Error, Result};
use crate::rates::{RatePlan, Regime};
use crate::rational::Rational;

/// Information matrices with a condition number above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStepConfig {
    pub regime: Regime,
    pub psi: Rational,
    /// `r` in the profile regime, `g` in the smooth ones.
    pub nuisance_rate: Rational,
    /// Number of Newton steps; `None` runs `k*` steps.
    #[serde(default)]
    pub k_max: Option<u32>,
    #[serde(default)]
    pub epsilon_stop: f64,
    pub hessian_mode: InfoConstruction,
    #[serde(default = "default_fd_pair")]
    pub fd_pair: (f64, f64),
    /// Constant `c` in `s_n = c n^{-s}` and `t_n = c n^{-t}`.
    #[serde(default = "default_step_constant")]
    pub step_constant: f64,
}

fn default_fd_pair() -> (f64, f64) {
    (-1.0, 1.0)
}

fn default_step_constant() -> f64 {
    1.0
}

impl KStepConfig {
    /// Config with the information construction implied by the regime.
    pub fn new(regime: Regime, psi: Rational, nuisance_rate: Rational) -> Self {
        let hessian_mode = match regime {
            Regime::Profile => InfoConstruction::NumericSecondDiff,
            Regime::SmoothAnalytic | Regime::Penalized => InfoConstruction::AnalyticHessian,
            Regime::SmoothFiniteDiff => InfoConstruction::GradientFD,
        };
        KStepConfig {
            regime,
            psi,
            nuisance_rate,
            k_max: None,
            epsilon_stop: 0.0,
            hessian_mode,
            fd_pair: default_fd_pair(),
            step_constant: default_step_constant(),
        }
    }

    pub fn with_k_max(mut self, k: u32) -> Self {
        self.k_max = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_stop >= 0.0) {
            return Err(Error::Config(format!("epsilon_stop = {} must be >= 0", self.epsilon_stop)));
        }
        if !(self.step_constant > 0.0 && self.step_constant.is_finite()) {
            return Err(Error::Config(format!("step_constant = {} must be positive", self.step_constant)));
        }
        let expected = KStepConfig::new(self.regime, self.psi.clone(), self.nuisance_rate.clone()).hessian_mode;
        if self.hessian_mode != expected {
            return Err(Error::Config(format!(
                "regime {:?} uses {:?} information, got {:?}",
                self.regime, expected, self.hessian_mode
            )));
        }
        if self.hessian_mode == InfoConstruction::GradientFD && !(self.fd_pair.0 < self.fd_pair.1) {
            return Err(Error::Config(format!("fd_pair {:?} needs t1 < t2", self.fd_pair)));
        }
        Ok(())
    }
}

/// Numerical step sizes for one profile-regime step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteStep {
    pub s_exponent: Rational,
    pub t_exponent: Rational,
    pub s_n: f64,
    pub t_n: f64,
}

/// A [`RatePlan`] bound to a sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcretePlan {
    pub n: usize,
    pub rate_plan: RatePlan,
    pub steps: Vec<ConcreteStep>,
}

/// `c · n^{-exponent}`.
pub fn step_size(n: usize, exponent: &Rational, constant: f64) -> f64 {
    constant * (-exponent.to_f64() * (n as f64).ln()).exp()
}

pub fn plan(cfg: &KStepConfig, n: usize) -> Result<ConcretePlan> {
    cfg.validate()?;
    if n < 1 {
        return Err(Error::domain("sample size must be positive"));
    }
    let rate_plan = RatePlan::new(cfg.regime, &cfg.psi, &cfg.nuisance_rate, cfg.k_max)?;
    let steps = rate_plan
        .step_schedule
        .iter()
        .map(|p| ConcreteStep {
            s_exponent: p.s_exponent.clone(),
            t_exponent: p.t_exponent.clone(),
            s_n: step_size(n, &p.s_exponent, cfg.step_constant),
            t_n: step_size(n, &p.t_exponent, cfg.step_constant),
        })
        .collect();
    Ok(ConcretePlan { n, rate_plan, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    KMaxReached,
    EpsilonRule,
    DomainError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub score: ScoreEstimate,
    pub info: InfoEstimate,
    pub s_n: Option<f64>,
    pub t_n: Option<f64>,
    /// `Ŝ_n` at the iterate the step started from.
    pub criterion_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStepTrajectory {
    pub regime: Regime,
    pub n: usize,
    pub k_star: u32,
    /// Index 0 is the initial estimate.
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
    /// Planned rate exponents `r_1, r_2, …` for the steps taken.
    pub tracked_rates: Vec<Rational>,
    /// `Ŝ_n` at the last iterate, when it was evaluated.
    pub final_criterion: Option<f64>,
    pub stopped_by: StopReason,
    /// Criterion fell twice in a row by more than `10 ε`.
    pub diverged: bool,
    pub failure: Option<String>,
}

impl KStepTrajectory {
    pub fn last(&self) -> Vector {
        Vector::from_column_slice(self.iterates.last().expect("trajectory holds the initial estimate"))
    }

    pub fn iterate(&self, k: usize) -> Option<Vector> {
        self.iterates.get(k).map(|v| Vector::from_column_slice(v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Dispatches on `cfg.regime`.
pub fn run<C: ProfiledCriterion + ?Sized>(c: &C, theta0: &Vector, cfg: &KStepConfig) -> Result<KStepTrajectory> {
    match cfg.regime {
        Regime::Profile => run_profile(c, theta0, cfg),
        _ => run_smooth(c, theta0, cfg),
    }
}

pub fn run_profile<C: ProfiledCriterion + ?Sized>(
    c: &C,
    theta0: &Vector,
    cfg: &KStepConfig,
) -> Result<KStepTrajectory> {
    if cfg.regime != Regime::Profile {
        return Err(Error::Config(format!("run_profile called with regime {:?}", cfg.regime)));
    }
    let concrete = plan(cfg, c.sample_size())?;
    iterate(c, theta0, cfg, &concrete, |theta, k| {
        let step = &concrete.steps[k];
        let score = numeric_score(c, theta, step.s_n)?;
        let info = numeric_info(c, theta, step.t_n)?;
        Ok((score, info, Some(step.s_n), Some(step.t_n)))
    })
}

pub fn run_smooth<C: ProfiledCriterion + ?Sized>(
    c: &C,
    theta0: &Vector,
    cfg: &KStepConfig,
) -> Result<KStepTrajectory> {
    if cfg.regime == Regime::Profile {
        return Err(Error::Config("run_smooth called with the profile regime".into()));
    }
    if !c.has_gradient() {
        return Err(Error::MissingCapability("gradient"));
    }
    let concrete = plan(cfg, c.sample_size())?;
    iterate(c, theta0, cfg, &concrete, |theta, _| {
        let score = analytic_score(c, theta)?;
        let info = match cfg.hessian_mode {
            InfoConstruction::AnalyticHessian => analytic_info(c, theta)?,
            InfoConstruction::GradientFD => gradient_fd_info(c, theta, cfg.fd_pair.0, cfg.fd_pair.1)?,
            InfoConstruction::NumericSecondDiff => unreachable!("rejected by validate"),
        };
        Ok((score, info, None, None))
    })
}

type StepEstimates = (ScoreEstimate, InfoEstimate, Option<f64>, Option<f64>);

fn iterate<C, F>(
    c: &C,
    theta0: &Vector,
    cfg: &KStepConfig,
    concrete: &ConcretePlan,
    mut estimate: F,
) -> Result<KStepTrajectory>
where
    C: ProfiledCriterion + ?Sized,
    F: FnMut(&Vector, usize) -> Result<StepEstimates>,
{
    if theta0.len() != c.dim() {
        return Err(Error::domain(format!(
            "initial estimate has dimension {}, criterion expects {}",
            theta0.len(),
            c.dim()
        )));
    }
    let k_max = concrete.rate_plan.exponents.len();
    let mut traj = KStepTrajectory {
        regime: cfg.regime,
        n: c.sample_size(),
        k_star: concrete.rate_plan.k_star,
        iterates: vec![theta0.iter().copied().collect()],
        steps: Vec::with_capacity(k_max),
        tracked_rates: Vec::with_capacity(k_max),
        final_criterion: None,
        stopped_by: StopReason::KMaxReached,
        diverged: false,
        failure: None,
    };
    if k_max == 0 {
        return Ok(traj);
    }
    let mut theta = theta0.clone();
    let mut value = c.evaluate(&theta)?;
    let mut drops = 0;
    for k in 0..k_max {
        let (score, info, s_n, t_n) = estimate(&theta, k)?;
        if !(info.condition <= SINGULAR_CONDITION) {
            traj.stopped_by = StopReason::DomainError;
            traj.failure = Some(
                Error::Singular {
                    condition: info.condition,
                    step: Some(k + 1),
                }
                .to_string(),
            );
            return Ok(traj);
        }
        let delta = match info.as_matrix().lu().solve(&score.as_vector()) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => {
                traj.stopped_by = StopReason::DomainError;
                traj.failure = Some(
                    Error::Singular {
                        condition: f64::INFINITY,
                        step: Some(k + 1),
                    }
                    .to_string(),
                );
                return Ok(traj);
            }
        };
        let next = c.post_step(&theta + delta);
        traj.steps.push(StepRecord {
            score,
            info,
            s_n,
            t_n,
            criterion_value: value,
        });
        traj.tracked_rates.push(concrete.rate_plan.exponents[k].clone());
        traj.iterates.push(next.iter().copied().collect());
        theta = next;
        let next_value = c.evaluate(&theta)?;
        if next_value < value - 10.0 * cfg.epsilon_stop {
            drops += 1;
            if drops >= 2 && !traj.diverged {
                log::warn!("criterion decreased at two consecutive steps (step {})", k + 1);
                traj.diverged = true;
            }
        } else {
            drops = 0;
        }
        let change = (next_value - value).abs();
        value = next_value;
        traj.final_criterion = Some(value);
        if cfg.epsilon_stop > 0.0 && change <= cfg.epsilon_stop && k + 1 < k_max {
            traj.stopped_by = StopReason::EpsilonRule;
            return Ok(traj);
        }
    }
    Ok(traj)
}
