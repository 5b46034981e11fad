use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lossprior(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lossprior"))
        .current_dir(dir)
        .env_remove("LOSSPRIOR_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fisher_normal_mu_var() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["fisher", "--model", "normal_mu_var", "--theta", "0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("fisher.json"));
    let entries: Vec<f64> = doc["fisher"]["entries"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(entries, vec![1.0, 0.0, 0.0, 0.5]);
    assert_eq!(doc["config"]["model"], "normal_mu_var");
    assert_eq!(doc["config"]["theta"][1], 1.0);
}

#[test]
fn fisher_bernoulli_condition_number() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["fisher", "--model", "bernoulli", "--theta", "0.5", "-o", "b.json"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("b.json"));
    assert!((doc["lambda_min"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert_eq!(doc["condition_number"].as_f64().unwrap(), 1.0);
}

#[test]
fn fisher_out_of_domain_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["fisher", "--model", "normal_mu_var", "--theta", "0,-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
}

#[test]
fn missing_model_and_unknown_flag_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lossprior(dir.path(), &["fisher", "--theta", "1"]).status.code(), Some(2));
    assert_eq!(lossprior(dir.path(), &["fisher", "--bogus"]).status.code(), Some(2));
    assert_eq!(lossprior(dir.path(), &["fisher", "--model", "nope", "--theta", "1"]).status.code(), Some(2));
}

#[test]
fn worth_normal_mean_ratios_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["worth", "--model", "normal_mean", "--theta", "0", "--deltas", "0.1,0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = data_rows(&dir.path().join("worth.csv"));
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!((r[4] - 1.0).abs() < 1e-12, "{r:?}");
        assert!((r[1] - r[3]).abs() < 1e-15);
    }
}

#[test]
fn worth_bernoulli_final_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(
        dir.path(),
        &["worth", "--model", "bernoulli", "--theta", "0.5", "--deltas", "0.1,0.01,0.001", "--format", "json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("worth.json"));
    let rows = doc["rows"].as_array().unwrap();
    assert!((rows[2]["ratio"].as_f64().unwrap() - 1.0).abs() < 0.01);
    assert_eq!(doc["config"]["oracle_points"], 10_000);
    assert_eq!(doc["config"]["seed"], 20_240_917);
}

#[test]
fn worth_empty_or_increasing_deltas_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = lossprior(dir.path(), &["worth", "--model", "bernoulli", "--theta", "0.5", "--deltas"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("delta"));
    let none = lossprior(dir.path(), &["worth", "--model", "bernoulli", "--theta", "0.5"]);
    assert_eq!(none.status.code(), Some(2));
    let up = lossprior(dir.path(), &["worth", "--model", "bernoulli", "--theta", "0.5", "--deltas", "0.01,0.1"]);
    assert_eq!(up.status.code(), Some(2));
}

#[test]
fn prior_grid_jeffreys_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(
        dir.path(),
        &["prior-grid", "--model", "normal_mu_var", "--kind", "jeffreys", "--axis=-1:1:5", "--axis", "0.25:4:41:log", "--normalize"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("prior_grid.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# config: ") && l.contains("\"kind\":\"jeffreys\"")));
    assert!(text.lines().any(|l| l == "mu,v,density"));
    assert!(!text.contains('\r'));
    let rows = data_rows(&path);
    assert_eq!(rows.len(), 5 * 41);
    let col: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == 0.0).collect();
    let (x0, y0) = (col[0][1].ln(), col[0][2].ln());
    let (x1, y1) = (col[40][1].ln(), col[40][2].ln());
    assert!(((y1 - y0) / (x1 - x0) + 1.5).abs() < 1e-9);
}

#[test]
fn prior_grid_fisher_isotropic_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(
        dir.path(),
        &["prior-grid", "--model", "poisson", "--geometry", "fisher_isotropic", "--axis", "0.5:10:20", "-o", "g.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    for r in data_rows(&dir.path().join("g.csv")) {
        assert!((r[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn prior_grid_finite_delta_tracks_min_eig() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["prior-grid", "--model", "bernoulli", "--axis", "0.2:0.8:13"];
    let a = lossprior(dir.path(), &[&common[..], &["--kind", "finite_delta", "--delta", "1e-3", "-o", "fd.csv"]].concat());
    let b = lossprior(dir.path(), &[&common[..], &["--kind", "min_eig", "-o", "me.csv"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let fd = data_rows(&dir.path().join("fd.csv"));
    let me = data_rows(&dir.path().join("me.csv"));
    for (x, y) in fd.iter().zip(&me) {
        assert!((x[1] / (0.5e-6 * y[1]) - 1.0).abs() < 0.01);
    }
}

#[test]
fn prior_grid_domain_failure_names_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(
        dir.path(),
        &["prior-grid", "--model", "bernoulli", "--kind", "finite_delta", "--delta", "0.1", "--axis", "0.05:0.95:3"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid node 0"));
}

#[test]
fn scenarios_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d1 = lossprior(dir.path(), &["scenario", "D1"]);
    assert_eq!(d1.status.code(), Some(0));
    let report = read_json(&dir.path().join("scenario_D1_invariance.json"));
    assert!(report["report"]["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));

    let d3 = lossprior(dir.path(), &["scenario", "D3"]);
    assert_eq!(d3.status.code(), Some(0));
    let report = read_json(&dir.path().join("scenario_D3_group_invariance.json"));
    assert!(report["report"]["checks"].as_array().unwrap().iter().any(|c| c["status"] == "paper_discrepancy"));

    let d5 = lossprior(dir.path(), &["scenario", "D5_weak_identification"]);
    assert_eq!(d5.status.code(), Some(0));
    let report = read_json(&dir.path().join("scenario_D5_weak_identification.json"));
    let slope = report["report"]["checks"][0]["values"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() <= 0.1);

    assert_eq!(lossprior(dir.path(), &["scenario", "D7"]).status.code(), Some(2));
    assert_eq!(lossprior(dir.path(), &["scenario"]).status.code(), Some(2));
}

#[test]
fn validate_is_green_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = lossprior(dir.path(), &["validate", "-o", "a.json"]);
    let b = lossprior(dir.path(), &["validate", "-o", "b.json"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let fa = std::fs::read(dir.path().join("a.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b.json")).unwrap();
    // outputs differ only in the echoed output path
    let strip = |bytes: &[u8]| String::from_utf8_lossy(bytes).replace("\"a.json\"", "X").replace("\"b.json\"", "X");
    assert_eq!(strip(&fa), strip(&fb));
    assert_eq!(a.stdout.iter().filter(|c| **c == b'\n').count(), 9);
}

#[test]
fn validate_repeated_to_same_path_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lossprior(dir.path(), &["validate"]).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("validate.json")).unwrap();
    assert_eq!(lossprior(dir.path(), &["validate"]).status.code(), Some(0));
    assert_eq!(first, std::fs::read(dir.path().join("validate.json")).unwrap());
}

#[test]
fn validate_with_injected_fault_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["validate", "--inject-fisher-scale", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("analytic/numeric Fisher agreement (bernoulli)"), "{err}");
}

#[test]
fn discrete_prior_poisson() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(dir.path(), &["discrete-prior", "--model", "poisson", "--point", "1", "--point", "2", "--point", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("discrete_prior.json"));
    let u1 = doc["prior"]["worths"][0].as_f64().unwrap();
    assert!((u1 - (1.0 - 2f64.ln())).abs() < 1e-12);
    let total: f64 = doc["prior"]["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-15);
    let dup = lossprior(dir.path(), &["discrete-prior", "--model", "poisson", "--point", "1", "--point", "1"]);
    assert_eq!(dup.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "model = \"poisson\"\ntheta = [2.0]\ndeltas = [0.1, 0.01]\nformat = \"json\"\n",
    )
    .unwrap();
    let out = lossprior(dir.path(), &["--config", "run.toml", "worth", "--theta", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("worth.json"));
    assert_eq!(doc["config"]["theta"][0], 3.0);
    assert_eq!(doc["config"]["model"], "poisson");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);

    std::fs::write(dir.path().join("bad.toml"), "modle = \"poisson\"\n").unwrap();
    let bad = lossprior(dir.path(), &["--config", "bad.toml", "worth"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_lossprior"))
        .current_dir(dir.path())
        .env("LOSSPRIOR_OUT_DIR", &env_dir)
        .args(["fisher", "--model", "poisson", "--theta", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("fisher.json").exists());

    let flag_dir = dir.path().join("from_flag");
    let out = Command::new(env!("CARGO_BIN_EXE_lossprior"))
        .current_dir(dir.path())
        .env("LOSSPRIOR_OUT_DIR", &env_dir)
        .args(["--out-dir", flag_dir.to_str().unwrap(), "fisher", "--model", "poisson", "--theta", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.join("fisher.json").exists());
}

#[test]
fn logistic_uses_recorded_synthetic_design() {
    let dir = tempfile::tempdir().unwrap();
    let out = lossprior(
        dir.path(),
        &["prior-grid", "--model", "logistic_regression", "--geometry", "data_dependent", "--beta-hat", "0.2,-0.1", "--axis=-1:1:3", "--axis=-1:1:3", "--format", "json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("prior_grid.json"));
    assert_eq!(doc["config"]["design_seed"], 7311);
    assert_eq!(doc["grid"]["metadata"]["violates_likelihood_principle"], true);
}

#[test]
fn logistic_from_design_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.csv"), "x1,x2\n1,0.5\n-0.3,1\n0.8,-1.2\n2,0.1\n").unwrap();
    let out = lossprior(dir.path(), &["fisher", "--model", "logistic_regression", "--design", "x.csv", "--theta", "0,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("fisher.json"));
    // at beta = 0 every weight is 1/4, so I = X'X / 4
    let i00 = doc["fisher"]["entries"][0].as_f64().unwrap();
    assert!((i00 - (1.0 + 0.09 + 0.64 + 4.0) / 4.0).abs() < 1e-12);
}
