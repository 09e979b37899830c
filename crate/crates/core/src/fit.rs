//! Single-dataset estimation: load or generate data, pick an initial
//! estimate, then run the k-step engine.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::Vector;
use crate::engine::{self, KStepConfig, KStepTrajectory};
use crate::error::{Error, Result};
use crate::init::{deterministic_search, stochastic_search, GridSpec, SearchSpace};
use crate::models::cem::KernelSpec;
use crate::models::generate::generate;
use crate::models::{ModelDataset, ModelKind};
use crate::rational::Rational;
use crate::sim::{build_criterion, oracle_initializer, PenaltyScaling};

/// Config schema understood by [`FitConfig`].
pub const FIT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Dataset file; relative paths are resolved against the config file.
    File(PathBuf),
    Generate { n: usize, theta0: Vec<f64>, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitInitMethod {
    /// Start at `theta`.
    Given,
    /// `θ₀ + n^{-ψ} u` around the generating parameter.
    Oracle,
    DeterministicGrid,
    StochasticGrid,
    /// Unpenalized partial spline fit (partial linear model only).
    PartialSpline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInit {
    pub method: FitInitMethod,
    /// Rate of the initial estimate; required by the oracle and grid methods.
    #[serde(default)]
    pub psi: Option<Rational>,
    /// Starting point (`given`) or search-box center (grids).
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default = "one")]
    pub side_scale: f64,
    #[serde(default = "two")]
    pub min_card_scale: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn schema() -> u32 {
    FIT_SCHEMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub model: ModelKind,
    pub data: DataSource,
    pub init: FitInit,
    pub engine: KStepConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub penalty: PenaltyScaling,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != FIT_SCHEMA {
            return Err(Error::Config(format!(
                "schema {} unsupported (expected {FIT_SCHEMA})",
                self.schema
            )));
        }
        self.engine.validate()?;
        let needs_psi = matches!(
            self.init.method,
            FitInitMethod::Oracle | FitInitMethod::DeterministicGrid | FitInitMethod::StochasticGrid
        );
        if needs_psi && self.init.psi.is_none() {
            return Err(Error::Config(format!("init.psi is required for {:?}", self.init.method)));
        }
        if self.init.method == FitInitMethod::Given && self.init.theta.is_none() {
            return Err(Error::Config("init.theta is required for the given initializer".into()));
        }
        if self.init.method == FitInitMethod::PartialSpline && self.model != ModelKind::Plm {
            return Err(Error::Config("partial-spline initializer needs the plm model".into()));
        }
        if !(self.init.half_width >= 0.0) {
            return Err(Error::Config("init.half_width must be >= 0".into()));
        }
        Ok(())
    }
}

/// Parses and validates a fit config.
pub fn load_fit_config(text: &str) -> Result<FitConfig> {
    let cfg: FitConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(cfg: &FitConfig, base: &Path) -> Result<(ModelDataset, Option<Vec<f64>>)> {
    match &cfg.data {
        DataSource::File(p) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            let file = File::open(&path)
                .map_err(|e| Error::Config(format!("cannot open data file {}: {e}", path.display())))?;
            let data = ModelDataset::read_csv(file)?;
            if data.kind() != cfg.model {
                return Err(Error::Config(format!(
                    "data file holds model {}, config names {}",
                    data.kind().tag(),
                    cfg.model.tag()
                )));
            }
            Ok((data, None))
        }
        DataSource::Generate { n, theta0, seed } => {
            Ok((generate(cfg.model, *n, theta0, *seed)?, Some(theta0.clone())))
        }
    }
}

/// Runs initializer and engine. `base` resolves relative data paths.
pub fn run_fit(cfg: &FitConfig, base: &Path) -> Result<KStepTrajectory> {
    cfg.validate()?;
    let (data, truth) = load_data(cfg, base)?;
    let n = data.len();
    let (crit, plm_sys) = build_criterion(data, &cfg.kernel, &cfg.penalty)?;
    let c = crit.as_ref();
    let d = c.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center = || -> Result<Vec<f64>> {
        cfg.init
            .theta
            .clone()
            .or_else(|| truth.clone())
            .ok_or_else(|| Error::Config("init.theta is required with file data".into()))
    };
    let start = match cfg.init.method {
        FitInitMethod::Given => Vector::from_vec(center()?),
        FitInitMethod::Oracle => {
            let theta0 = truth
                .clone()
                .ok_or_else(|| Error::Config("oracle initializer needs generated data".into()))?;
            oracle_initializer(&theta0, cfg.init.psi.as_ref().expect("validated"), n, &mut rng)?
        }
        FitInitMethod::DeterministicGrid | FitInitMethod::StochasticGrid => {
            let space = SearchSpace::cube(&center()?, cfg.init.half_width)?;
            let mut spec = GridSpec::new(
                cfg.init.psi.clone().expect("validated"),
                cfg.init.side_scale,
                cfg.init.min_card_scale,
                cfg.seed,
            );
            if cfg.init.method == FitInitMethod::DeterministicGrid {
                spec.offset = (0..d).map(|_| rng.random::<f64>()).collect();
                deterministic_search(c, &space, &spec, n)?.as_vector()
            } else {
                stochastic_search(c, &space, &spec, n, &mut rng)?.as_vector()
            }
        }
        FitInitMethod::PartialSpline => plm_sys.as_ref().expect("plm model").unpenalized_fit()?,
    };
    if start.len() != d {
        return Err(Error::Config(format!(
            "initial estimate has dimension {}, model has {d}",
            start.len()
        )));
    }
    log::info!("initial estimate {:?}", start.as_slice());
    engine::run(c, &start, &cfg.engine)
}
