//! `kstep`: rate tables, iteration plans, single fits and simulation campaigns.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kstep_core::engine::{plan, KStepConfig, StopReason};
use kstep_core::fit::{load_fit_config, run_fit};
use kstep_core::models::generate::generate;
use kstep_core::models::ModelKind;
use kstep_core::rates::tables::{diff_tables, emit_tables, published};
use kstep_core::rates::Regime;
use kstep_core::sim::{load_experiment_config, run_experiment, ExperimentConfig};
use kstep_core::{Error, Rational};
use manifest::RunManifest;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Domain(_) | Error::Io(_) | Error::MissingCapability(_) => EXIT_USAGE,
            Error::Evaluation { .. } | Error::Singular { .. } | Error::NoConvergence { .. } | Error::Assertion(_) => {
                EXIT_NUMERICAL
            }
        };
        CliError { code, message: e.to_string() }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

#[derive(Parser)]
#[command(name = "kstep", version, about = "k-step Newton estimation for semiparametric models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Profile,
    SmoothAnalytic,
    #[value(name = "smooth-fd", alias = "smooth-finite-diff")]
    SmoothFd,
    Penalized,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Profile => Regime::Profile,
            RegimeArg::SmoothAnalytic => Regime::SmoothAnalytic,
            RegimeArg::SmoothFd => Regime::SmoothFiniteDiff,
            RegimeArg::Penalized => Regime::Penalized,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Recompute the published rate tables and check them.
    Tables {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print k*, the rate sequence and the step sizes for one setting.
    Plan {
        #[arg(long, value_enum)]
        regime: RegimeArg,
        #[arg(long)]
        psi: String,
        /// Nuisance rate (profile regime).
        #[arg(long)]
        r: Option<String>,
        /// Regularized rate (smooth regimes).
        #[arg(long)]
        g: Option<String>,
        /// Sample size for concrete step sizes.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k_max: Option<u32>,
    },
    /// Fit one dataset and write its trajectory.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a Monte Carlo campaign.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a simulated dataset file.
    Generate {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta0: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tables { out } => cmd_tables(&out),
        Command::Plan { regime, psi, r, g, n, k_max } => cmd_plan(regime, &psi, r.as_deref(), g.as_deref(), n, k_max),
        Command::Fit { config, out } => cmd_fit(&config, &out),
        Command::Simulate { config, replications, out } => cmd_simulate(&config, replications, &out),
        Command::Generate { model, n, theta0, seed, out } => cmd_generate(&model, n, &theta0, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn cmd_tables(out: &Path) -> Result<(), CliError> {
    let manifest = RunManifest::start("tables", None, serde_json::Value::Null, None);
    let tables = emit_tables()?;
    create_dir(out)?;
    for t in &tables {
        write_file(&out.join(format!("table{}.csv", t.id)), &t.to_csv()?)?;
    }
    let json = serde_json::to_string_pretty(&tables).map_err(|e| CliError::numerical(e.to_string()))?;
    write_file(&out.join("tables.json"), &json)?;
    manifest.finish_into(out)?;
    let diff = diff_tables(&tables, &published());
    if !diff.is_empty() {
        for line in &diff {
            eprintln!("{line}");
        }
        return Err(CliError {
            code: EXIT_MISMATCH,
            message: format!("{} table entries differ from the published values", diff.len()),
        });
    }
    println!("tables written to {}; all entries match", out.display());
    Ok(())
}

fn parse_rational(flag: &str, text: &str) -> Result<Rational, CliError> {
    text.parse::<Rational>()
        .map_err(|e| CliError::usage(format!("--{flag}: cannot parse {text:?}: {e}")))
}

fn cmd_plan(
    regime: RegimeArg,
    psi: &str,
    r: Option<&str>,
    g: Option<&str>,
    n: Option<usize>,
    k_max: Option<u32>,
) -> Result<(), CliError> {
    let regime = Regime::from(regime);
    let psi = parse_rational("psi", psi)?;
    if !psi.is_positive() || psi > Rational::half() {
        return Err(CliError::usage(format!("--psi: psi = {psi} must satisfy 0 < psi <= 1/2")));
    }
    let (flag, rate) = match (regime, r, g) {
        (Regime::Profile, Some(r), None) => ("r", parse_rational("r", r)?),
        (Regime::Profile, _, Some(_)) => return Err(CliError::usage("--g: the profile regime takes --r")),
        (Regime::Profile, None, None) => return Err(CliError::usage("--r: required for the profile regime")),
        (_, Some(_), _) => return Err(CliError::usage("--r: smooth regimes take --g")),
        (Regime::SmoothFiniteDiff, None, None) => {
            return Err(CliError::usage("--g: required for the smooth-fd regime"))
        }
        (_, None, Some(g)) => ("g", parse_rational("g", g)?),
        // the analytic constructions do not depend on g
        (_, None, None) => ("g", Rational::half()),
    };
    if rate <= kstep_core::q(1, 4) || rate > Rational::half() {
        return Err(CliError::usage(format!("--{flag}: {flag} = {rate} must satisfy 1/4 < {flag} <= 1/2")));
    }
    let mut cfg = KStepConfig::new(regime, psi.clone(), rate.clone());
    cfg.k_max = k_max;
    let concrete = plan(&cfg, n.unwrap_or(1)).map_err(|e| match e {
        Error::Domain(m) => CliError::usage(format!("--psi/--{flag}: {m}")),
        other => other.into(),
    })?;
    let rp = &concrete.rate_plan;
    println!("regime={} psi={psi} {flag}={rate}", regime_name(regime));
    println!("k*={}", rp.k_star);
    for (i, e) in rp.exponents.iter().enumerate() {
        let k = i + 1;
        let mut line = format!("k={k} exponent={e}");
        if let Some(step) = concrete.steps.get(i) {
            line += &format!(" s_exp={} t_exp={}", step.s_exponent, step.t_exponent);
            if n.is_some() {
                line += &format!(" s_n={:.6e} t_n={:.6e}", step.s_n, step.t_n);
            }
        }
        println!("{line}");
    }
    Ok(())
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Profile => "profile",
        Regime::SmoothAnalytic => "smooth-analytic",
        Regime::SmoothFiniteDiff => "smooth-fd",
        Regime::Penalized => "penalized",
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))
}

fn cmd_fit(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = load_fit_config(&read_config(config)?)?;
    let manifest = RunManifest::start("fit", Some(config), to_json(&cfg), Some(cfg.seed));
    let base = config.parent().unwrap_or(Path::new("."));
    let traj = run_fit(&cfg, base)?;
    create_dir(out)?;
    write_file(&out.join("trajectory.json"), &traj.to_json()?)?;
    manifest.finish_into(out)?;
    if traj.stopped_by == StopReason::DomainError {
        return Err(CliError::numerical(format!(
            "engine stopped early: {}",
            traj.failure.as_deref().unwrap_or("numerical failure")
        )));
    }
    println!("theta = {:?} after {} step(s)", traj.last().as_slice(), traj.iterates.len() - 1);
    Ok(())
}

fn cmd_simulate(config: &Path, replications: Option<usize>, out: &Path) -> Result<(), CliError> {
    let text = read_config(config)?;
    let cfg: ExperimentConfig = match replications {
        // validate only after the override
        Some(r) => {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
            let Some(obj) = value.as_object_mut() else {
                return Err(CliError::usage("invalid configuration: expected a JSON object"));
            };
            obj.insert("replications".into(), r.into());
            load_experiment_config(&value.to_string())?
        }
        None => load_experiment_config(&text)?,
    };
    let manifest = RunManifest::start("simulate", Some(config), to_json(&cfg), Some(cfg.seed));
    let report = run_experiment(&cfg)?;
    create_dir(out)?;
    write_file(&out.join("report.json"), &report.to_json()?)?;
    write_file(&out.join("medians.csv"), &report.medians_csv()?)?;
    manifest.finish_into(out)?;
    for c in &report.comparisons {
        println!(
            "{} {}: observed {:.4}, bound {:.4}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.bound
        );
    }
    println!(
        "{} replications failed; all comparisons pass: {}",
        report.failure_count,
        report.all_pass()
    );
    Ok(())
}

fn cmd_generate(model: &str, n: usize, theta0: &[f64], seed: u64, out: &Path) -> Result<(), CliError> {
    let kind = ModelKind::from_tag(model).map_err(|e| CliError::usage(format!("--model: {e}")))?;
    let data = generate(kind, n, theta0, seed)?;
    let file = fs::File::create(out).map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}
