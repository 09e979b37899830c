use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn kstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstep"))
        .args(args)
        .output()
        .expect("run kstep")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn tables_written_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = kstep(&["tables", "-o", path_str(d)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let t1 = fs::read_to_string(a.join("table1.csv")).unwrap();
    assert!(t1.lines().any(|l| l.starts_with("cox,1/4,2,25/48")), "{t1}");
    for f in ["table1.csv", "table2.csv", "table3.csv", "tables.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "tables");
}

#[test]
fn tables_unwritable_destination_exits_2() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = kstep(&["tables", "-o", path_str(&file.join("sub"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cannot"), "{}", stderr(&out));
}

#[test]
fn plan_examples() {
    let out = kstep(&["plan", "--regime", "profile", "--psi", "1/3", "--r", "1/3", "--n", "10000"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("k*=2"), "{text}");
    assert!(text.contains("k=1 exponent=1/2 s_exp=1/2 t_exp=1/6"), "{text}");
    assert!(text.contains("k=2 exponent=7/12 s_exp=7/12 t_exp=1/4"), "{text}");

    let out = kstep(&["plan", "--regime", "smooth-fd", "--psi", "1/4", "--g", "151/600"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("k*=8"));
    assert!(stdout(&out).contains("k=8 exponent=27/40"));
}

#[test]
fn plan_errors_name_the_flag() {
    let out = kstep(&["plan", "--regime", "profile", "--psi", "3/5", "--r", "1/3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--psi"), "{}", stderr(&out));

    let out = kstep(&["plan", "--regime", "profile", "--psi", "1/3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--r"));

    let out = kstep(&["plan", "--regime", "smooth-fd", "--psi", "1/4", "--g", "oops"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--g"));

    // psi too small for the smooth regime
    let out = kstep(&["plan", "--regime", "smooth-fd", "--psi", "1/5", "--g", "4/15"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--psi/--g"), "{}", stderr(&out));
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn plm_fit_config(k_max: u32) -> Value {
    serde_json::json!({
        "model": "plm",
        "data": { "generate": { "n": 400, "theta0": [3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0], "seed": 13 } },
        "init": { "method": "partial-spline" },
        "engine": {
            "regime": "penalized", "psi": "1/2", "nuisance_rate": "1/2",
            "hessian_mode": "analytic-hessian", "k_max": k_max
        },
        "penalty": { "lambda0": 1.0, "tau0": 1.0 }
    })
}

fn trajectory(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("trajectory.json")).unwrap()).unwrap()
}

#[test]
fn penalized_fit_zeroes_null_coordinates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "fit.json", &plm_fit_config(1));
    let out = kstep(&["fit", "--config", path_str(&cfg), "-o", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = trajectory(dir.path());
    let last: Vec<f64> = t["iterates"][1].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for j in [2, 3, 5, 6, 7] {
        assert_eq!(last[j], 0.0, "coordinate {j}");
    }
    for j in [0, 1, 4] {
        assert!(last[j].abs() > 1.0, "coordinate {j}");
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn fit_with_zero_steps_keeps_initial_estimate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "fit.json", &plm_fit_config(0));
    let out = kstep(&["fit", "--config", path_str(&cfg), "-o", path_str(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = trajectory(dir.path());
    assert_eq!(t["iterates"].as_array().unwrap().len(), 1);
    assert_eq!(t["steps"].as_array().unwrap().len(), 0);
}

#[test]
fn malformed_fit_config_names_missing_key() {
    let dir = TempDir::new().unwrap();
    let mut value = plm_fit_config(1);
    value.as_object_mut().unwrap().remove("engine");
    let cfg = write_config(dir.path(), "fit.json", &value);
    let out = kstep(&["fit", "--config", path_str(&cfg), "-o", path_str(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("engine"), "{}", stderr(&out));
}

#[test]
fn fit_from_generated_file_and_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("cox.csv");
    let out = kstep(&["generate", "--model", "cox-cs", "--n", "200", "--theta0", "0.5", "--seed", "3", "-o", path_str(&data)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cfg = serde_json::json!({
        "model": "cox-cs",
        "data": { "file": "cox.csv" },
        "init": { "method": "given", "theta": [0.3] },
        "engine": { "regime": "profile", "psi": "1/3", "nuisance_rate": "1/3", "hessian_mode": "numeric-second-diff" }
    });
    let path = write_config(dir.path(), "fit.json", &cfg);
    let out_dir = dir.path().join("ok");
    let out = kstep(&["fit", "--config", path_str(&path), "-o", path_str(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(trajectory(&out_dir)["iterates"].as_array().unwrap().len(), 3);

    // Covariates without variation leave the profile criterion flat in θ.
    let text = fs::read_to_string(&data).unwrap();
    let flat: String = text
        .lines()
        .map(|l| {
            if l.starts_with('#') {
                l.to_string()
            } else {
                let mut f: Vec<&str> = l.split(',').collect();
                f[2] = "0.0";
                f.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&data, flat).unwrap();
    let bad_dir = dir.path().join("bad");
    let out = kstep(&["fit", "--config", path_str(&path), "-o", path_str(&bad_dir)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert_eq!(trajectory(&bad_dir)["stopped_by"], "domain-error");
}

fn small_experiment() -> Value {
    serde_json::json!({
        "schema": 1,
        "model": "cem-normal",
        "theta0": [1.0, -0.5],
        "n_grid": [60, 120],
        "replications": 8,
        "init": { "method": "oracle", "psi": "1/3" },
        "engine": { "regime": "smooth-analytic", "psi": "1/3", "nuisance_rate": "1/2", "hessian_mode": "analytic-hessian" },
        "seed": 5
    })
}

#[test]
fn simulate_writes_outputs_deterministically() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sim.json", &small_experiment());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = kstep(&["simulate", "--config", path_str(&cfg), "-o", path_str(d)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    let medians = fs::read_to_string(a.join("medians.csv")).unwrap();
    assert!(medians.lines().count() > 1);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["resolved_config"]["replications"], 8);
}

#[test]
fn simulate_rejects_zero_replications() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sim.json", &small_experiment());
    let out = kstep(&["simulate", "--config", path_str(&cfg), "--replications", "0", "-o", path_str(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("replications"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn bundled_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["table1_cox.json", "cem_normal_smooth.json", "plm_one_step.json"] {
        let text = fs::read_to_string(root.join(name)).unwrap();
        kstep_core::sim::load_experiment_config(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let text = fs::read_to_string(root.join("fit_plm.json")).unwrap();
    kstep_core::fit::load_fit_config(&text).unwrap();
}
