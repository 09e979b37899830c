//! Exact rate calculus for k-step Newton-Raphson estimation.
//!
//! Every exponent here is a [`Rational`]: `r_k` means the k-step iterate is
//! within `O_P(n^{-r_k})` of the full maximizer. Iteration counts that are
//! defined through ceilings of log-ratios are computed by exact
//! exponentiate-and-compare, never through floating logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{q, Rational};

/// Hard cap on the integer searches below; every admissible input needs far fewer.
const MAX_LOG_STEPS: u32 = 4096;

/// Which estimation regime a plan describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Non-smooth profile likelihood, numeric score and information.
    Profile,
    /// Differentiable criterion with analytic hessian.
    SmoothAnalytic,
    /// Differentiable criterion, information from finite differences of the gradient.
    SmoothFiniteDiff,
    /// Penalized criterion (analytic hessian of the smooth part).
    Penalized,
}

/// How the information matrix is built in the smooth regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothMode {
    Analytic,
    FiniteDiff,
}

impl Regime {
    pub fn smooth_mode(self) -> Option<SmoothMode> {
        match self {
            Regime::Profile => None,
            Regime::SmoothAnalytic | Regime::Penalized => Some(SmoothMode::Analytic),
            Regime::SmoothFiniteDiff => Some(SmoothMode::FiniteDiff),
        }
    }
}

/// Orders of the two numerical-derivative step sizes: `s_n ≍ n^{-s_exponent}`
/// (score) and `t_n ≍ n^{-t_exponent}` (information).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSizePair {
    pub s_exponent: Rational,
    pub t_exponent: Rational,
}

/// The three ways a profile-regime step can improve the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// `r_{k-1} < r`: error raised to the power 3/2.
    Superlinear,
    /// `r <= r_{k-1} < 1/2`: error^{1/2} times `n^{-r}`.
    NuisanceLimited,
    /// `r_{k-1} >= 1/2`: the floor `n^{-r-1/4}`.
    Saturated,
}

/// Smallest `m >= 0` with `base^m >= target` (`base > 1`).
pub fn ceil_log(target: &Rational, base: &Rational) -> Result<u32> {
    int_log(target, base, false)
}

/// Smallest `m >= 0` with `base^m > target` (`base > 1`).
pub fn ceil_log_strict(target: &Rational, base: &Rational) -> Result<u32> {
    int_log(target, base, true)
}

fn int_log(target: &Rational, base: &Rational, strict: bool) -> Result<u32> {
    if *base <= 1 {
        return Err(Error::domain(format!("log base {base} must exceed 1")));
    }
    let mut power = Rational::one();
    for m in 0..=MAX_LOG_STEPS {
        let done = if strict { power > *target } else { power >= *target };
        if done {
            return Ok(m);
        }
        power = power * base;
    }
    Err(Error::domain(format!(
        "iteration count for target {target} exceeds {MAX_LOG_STEPS}"
    )))
}

fn check_psi(psi: &Rational) -> Result<()> {
    if !psi.is_positive() {
        return Err(Error::domain(format!("psi = {psi} violates psi > 0")));
    }
    if *psi > Rational::half() {
        return Err(Error::domain(format!("psi = {psi} violates psi <= 1/2")));
    }
    Ok(())
}

fn check_quarter_half(name: &str, v: &Rational) -> Result<()> {
    if *v <= q(1, 4) {
        return Err(Error::domain(format!("{name} = {v} violates {name} > 1/4")));
    }
    if *v > Rational::half() {
        return Err(Error::domain(format!("{name} = {v} violates {name} <= 1/2")));
    }
    Ok(())
}

fn check_k_max(k_max: u32) -> Result<()> {
    if k_max == 0 {
        return Err(Error::domain("k_max = 0 violates k_max >= 1"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Profile regime
// ---------------------------------------------------------------------------

/// `psi (3/2)^k`.
pub fn s1(psi: &Rational, k: u32) -> Rational {
    psi * &q(3, 2).pow(k as i32)
}

/// `2r + 2^{-k}(psi - 2r)`.
pub fn s2(psi: &Rational, r: &Rational, k: u32) -> Rational {
    let two_r = q(2, 1) * r;
    &two_r + &((psi - &two_r) * q(1, 2).pow(k as i32))
}

/// Number of superlinear steps before the tracked rate reaches `r`.
pub fn k1(psi: &Rational, r: &Rational) -> Result<u32> {
    ceil_log(&(r / psi), &q(3, 2))
}

/// Number of nuisance-limited steps needed to reach `1/2` from `psi >= r`.
pub fn k2(psi: &Rational, r: &Rational) -> Result<u32> {
    let two_r = q(2, 1) * r;
    ceil_log(&((&two_r - psi) / (two_r - Rational::half())), &q(2, 1))
}

/// Closed-form pieces of `S(psi, r, ·)`.
struct ProfileShape {
    k1: u32,
    s1_tilde: Rational,
    /// `Some(K̃₂)` when the nuisance-limited stage is entered.
    k2_tilde: Option<u32>,
    cap: Rational,
}

fn profile_shape(psi: &Rational, r: &Rational) -> Result<ProfileShape> {
    check_psi(psi)?;
    check_quarter_half("r", r)?;
    let k1 = k1(psi, r)?;
    let s1_tilde = s1(psi, k1);
    if s1_tilde < *r {
        return Err(Error::Assertion(format!(
            "S1(psi, K1) = {s1_tilde} fell below r = {r} for psi = {psi}"
        )));
    }
    let k2_tilde = if s1_tilde >= Rational::half() {
        None
    } else {
        Some(k2(&s1_tilde, r)?)
    };
    Ok(ProfileShape {
        k1,
        s1_tilde,
        k2_tilde,
        cap: r + &q(1, 4),
    })
}

impl ProfileShape {
    fn rate(&self, psi: &Rational, r: &Rational, k: u32) -> Rational {
        if k <= self.k1 {
            return s1(psi, k);
        }
        match self.k2_tilde {
            None => self.cap.clone(),
            Some(k2t) if k <= self.k1 + k2t => s2(&self.s1_tilde, r, k - self.k1),
            Some(_) => self.cap.clone(),
        }
    }
}

/// `S(psi, r, k)` for a single `k >= 0` (`k = 0` gives `psi`).
pub fn profile_rate(psi: &Rational, r: &Rational, k: u32) -> Result<Rational> {
    let shape = profile_shape(psi, r)?;
    Ok(shape.rate(psi, r, k))
}

/// `[S(psi, r, 1), …, S(psi, r, k_max)]`, capped at `r + 1/4`.
pub fn profile_rate_sequence(psi: &Rational, r: &Rational, k_max: u32) -> Result<Vec<Rational>> {
    check_k_max(k_max)?;
    let shape = profile_shape(psi, r)?;
    Ok((1..=k_max).map(|k| shape.rate(psi, r, k)).collect())
}

/// Minimal iteration count making the profile k-step estimator first-order
/// equivalent to the maximizer.
pub fn k_star_profile(psi: &Rational, r: &Rational) -> Result<u32> {
    let shape = profile_shape(psi, r)?;
    let two_r = q(2, 1) * r;
    let ratio = (&two_r - &shape.s1_tilde) / (two_r - Rational::half());
    let k_star = shape.k1 + ceil_log_strict(&ratio, &q(2, 1))?;

    let scanned = first_above_half(|k| shape.rate(psi, r, k), k_star + 2);
    if scanned != Some(k_star) {
        return Err(Error::Assertion(format!(
            "closed-form k* = {k_star} disagrees with sequence scan {scanned:?} (psi = {psi}, r = {r})"
        )));
    }
    Ok(k_star)
}

fn first_above_half(rate: impl Fn(u32) -> Rational, limit: u32) -> Option<u32> {
    (1..=limit).find(|&k| rate(k) > Rational::half())
}

/// Iterates of the profile regime that the step-size schedule produces,
/// together with the steps used to get there.
pub fn step_size_schedule(r_prev: &Rational, r: &Rational) -> Result<(StepSizePair, Rational)> {
    let (pair, next, _) = step_size_stage(r_prev, r)?;
    Ok((pair, next))
}

/// As [`step_size_schedule`] but also reports which stage applied.
pub fn step_size_stage(r_prev: &Rational, r: &Rational) -> Result<(StepSizePair, Rational, Stage)> {
    if !r_prev.is_positive() {
        return Err(Error::domain(format!("r_prev = {r_prev} violates r_prev > 0")));
    }
    check_quarter_half("r", r)?;
    let half = Rational::half();
    let half_prev = r_prev * &half;
    let out = if r_prev < r {
        let s = r_prev * &q(3, 2);
        (
            StepSizePair {
                s_exponent: s.clone(),
                t_exponent: half_prev,
            },
            s,
            Stage::Superlinear,
        )
    } else if *r_prev < half {
        let s = r + &half_prev;
        (
            StepSizePair {
                s_exponent: s.clone(),
                t_exponent: half_prev,
            },
            s,
            Stage::NuisanceLimited,
        )
    } else {
        let s = r + &q(1, 4);
        (
            StepSizePair {
                s_exponent: s.clone(),
                t_exponent: half_prev,
            },
            s,
            Stage::Saturated,
        )
    };
    Ok(out)
}

// ---------------------------------------------------------------------------
// Smooth (regularized) regime
// ---------------------------------------------------------------------------

/// `(1/2 - g) + 2^k (psi + g - 1/2)`.
pub fn r1(psi: &Rational, g: &Rational, k: u32) -> Rational {
    let half = Rational::half();
    (&half - g) + q(2, 1).pow(k as i32) * (psi + g - half)
}

/// `k g + psi`.
pub fn r2(psi: &Rational, g: &Rational, k: u32) -> Rational {
    Rational::integer(k as i64) * g + psi.clone()
}

fn l1_target(psi: &Rational, g: &Rational) -> Rational {
    g / &(psi + g - Rational::half())
}

/// Doubling steps before the finite-difference rate reaches `1/2`.
pub fn l1(psi: &Rational, g: &Rational) -> Result<u32> {
    ceil_log(&l1_target(psi, g), &q(2, 1))
}

fn check_smooth(psi: &Rational, g: &Rational, mode: SmoothMode) -> Result<()> {
    check_psi(psi)?;
    if mode == SmoothMode::FiniteDiff {
        check_quarter_half("g", g)?;
        if *psi <= Rational::half() - g.clone() {
            return Err(Error::domain(format!(
                "initial rate too slow for smooth regime: psi = {psi} <= 1/2 - g = {}",
                Rational::half() - g.clone()
            )));
        }
    }
    Ok(())
}

fn smooth_rate_unchecked(psi: &Rational, g: &Rational, mode: SmoothMode, l1: u32, k: u32) -> Rational {
    match mode {
        SmoothMode::Analytic => psi * &q(2, 1).pow(k as i32),
        SmoothMode::FiniteDiff => {
            if k <= l1 {
                r1(psi, g, k)
            } else {
                r2(&r1(psi, g, l1), g, k - l1)
            }
        }
    }
}

/// `[r_1, …, r_{k_max}]` in a smooth regime. Analytic mode ignores `g`.
pub fn smooth_rate_sequence(
    psi: &Rational,
    g: &Rational,
    mode: SmoothMode,
    k_max: u32,
) -> Result<Vec<Rational>> {
    check_k_max(k_max)?;
    check_smooth(psi, g, mode)?;
    let l1 = match mode {
        SmoothMode::Analytic => 0,
        SmoothMode::FiniteDiff => l1(psi, g)?,
    };
    Ok((1..=k_max)
        .map(|k| smooth_rate_unchecked(psi, g, mode, l1, k))
        .collect())
}

/// Minimal iteration count in a smooth regime. Analytic mode ignores `g`.
pub fn k_star_smooth(psi: &Rational, g: &Rational, mode: SmoothMode) -> Result<u32> {
    check_smooth(psi, g, mode)?;
    let (k_star, l1) = match mode {
        SmoothMode::Analytic => (
            ceil_log_strict(&(Rational::one() / (q(2, 1) * psi)), &q(2, 1))?,
            0,
        ),
        SmoothMode::FiniteDiff => (
            ceil_log_strict(&l1_target(psi, g), &q(2, 1))?,
            l1(psi, g)?,
        ),
    };
    let scanned = first_above_half(|k| smooth_rate_unchecked(psi, g, mode, l1, k), k_star + 2);
    if scanned != Some(k_star) {
        return Err(Error::Assertion(format!(
            "closed-form k* = {k_star} disagrees with sequence scan {scanned:?} (psi = {psi}, g = {g})"
        )));
    }
    Ok(k_star)
}

// ---------------------------------------------------------------------------
// Kernel bandwidth to regularized rate
// ---------------------------------------------------------------------------

/// Bandwidth exponent, moment order and slack for kernel nuisance estimates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRateInputs {
    pub alpha: Rational,
    pub q: u32,
    pub epsilon: Rational,
}

impl KernelRateInputs {
    pub fn validate(&self) -> Result<()> {
        if self.q < 10 || self.q % 2 != 0 {
            return Err(Error::domain(format!("q = {} must be an even integer >= 10", self.q)));
        }
        if !self.epsilon.is_positive() {
            return Err(Error::domain(format!("epsilon = {} must be positive", self.epsilon)));
        }
        let qi = self.q as i64;
        let upper = q(qi - 2, 4 * qi + 16);
        if self.alpha <= q(1, 8) || self.alpha >= upper {
            return Err(Error::domain(format!(
                "alpha = {} outside (1/8, {upper})",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `(g, delta)` implied by a kernel bandwidth `b_n ≍ n^{-alpha}`.
pub fn kernel_rates(inp: &KernelRateInputs) -> Result<(Rational, Rational)> {
    inp.validate()?;
    let qi = inp.q as i64;
    let base = q(qi, 2 * qi + 4);
    let bandwidth_branch = q(2, 1) * inp.alpha.clone();
    let moment_branch = &base - &(&inp.alpha * &q(qi + 4, qi + 2)) - inp.epsilon.clone();
    let g = bandwidth_branch.min(moment_branch);
    let delta = base - &inp.alpha * &q(2 * qi + 6, qi + 2) - q(2, 1) * inp.epsilon.clone();

    if g <= q(1, 4) || g > Rational::half() {
        return Err(Error::domain(format!("derived g = {g} not in (1/4, 1/2]")));
    }
    let lower = q(2, 1) * g.clone() - Rational::half();
    if delta < lower || delta > g {
        return Err(Error::domain(format!(
            "derived delta = {delta} not in [2g - 1/2, g] = [{lower}, {g}]"
        )));
    }
    Ok((g, delta))
}

// ---------------------------------------------------------------------------
// Rate plans
// ---------------------------------------------------------------------------

/// All analytic quantities governing one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePlan {
    pub regime: Regime,
    pub psi: Rational,
    /// Nuisance rate `r` (profile) or regularized rate `g` (smooth regimes).
    pub nuisance_rate: Rational,
    pub k_star: u32,
    /// `r_1, …, r_{k_max}`.
    pub exponents: Vec<Rational>,
    /// Per-step orders of `(s_n, t_n)`; empty outside the profile regime.
    pub step_schedule: Vec<StepSizePair>,
}

impl RatePlan {
    /// Builds the plan for `k_max` steps (`None` means `k*`).
    pub fn new(regime: Regime, psi: &Rational, rate: &Rational, k_max: Option<u32>) -> Result<Self> {
        match regime.smooth_mode() {
            None => {
                let k_star = k_star_profile(psi, rate)?;
                let k_max = k_max.unwrap_or(k_star);
                let mut schedule = Vec::with_capacity(k_max as usize);
                let mut exponents = Vec::with_capacity(k_max as usize);
                let mut tracked = psi.clone();
                for _ in 0..k_max {
                    let (pair, next) = step_size_schedule(&tracked, rate)?;
                    schedule.push(pair);
                    exponents.push(next.clone());
                    tracked = next;
                }
                if k_max > 0 {
                    let closed = profile_rate_sequence(psi, rate, k_max)?;
                    if closed != exponents {
                        return Err(Error::Assertion(format!(
                            "schedule rates {exponents:?} differ from closed form {closed:?}"
                        )));
                    }
                }
                Ok(RatePlan {
                    regime,
                    psi: psi.clone(),
                    nuisance_rate: rate.clone(),
                    k_star,
                    exponents,
                    step_schedule: schedule,
                })
            }
            Some(mode) => {
                let k_star = k_star_smooth(psi, rate, mode)?;
                let k_max = k_max.unwrap_or(k_star);
                let exponents = if k_max == 0 {
                    Vec::new()
                } else {
                    smooth_rate_sequence(psi, rate, mode, k_max)?
                };
                Ok(RatePlan {
                    regime,
                    psi: psi.clone(),
                    nuisance_rate: rate.clone(),
                    k_star,
                    exponents,
                    step_schedule: Vec::new(),
                })
            }
        }
    }
}

pub mod tables;
