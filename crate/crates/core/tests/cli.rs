use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const STABILITY_HEADER: &str =
    "experiment,trial,step,delta,a_t,bound_gd,bound_rsgd_exp,bound_rsgd_hp,bound_persgd,notes";
const RISK_HEADER: &str = "experiment,trial,n,eps_gen,eps_opt,eps_approx,eps_risk,residual,excess_risk,bound,notes";

fn uaslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uaslab"))
        .args(args)
        .env_remove("UASLAB_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_into(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    uaslab(&args)
}

fn summary_without_header(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("header");
    v
}

const RSGD_STABILITY: &str = r#"
experiment = "stability"
trials = 8
trace_trials = 2

[problem]
n = 6
iterations = 30
dim = 3
radius = 1.0

[algorithm]
name = "rsgd"
eta = 0.1

[loss]
family = "hinge"
pair = "random"
pair_seed = 3
"#;

const SMALL_RISK: &str = r#"
experiment = "risk"
trials = 4

[problem]
n = [8, 16]
iterations = "n^2"
dim = 2
radius = 1.0

[algorithm]
name = "gd"
eta_rule = "tuned"

[distribution]
family = "absolute-deviation"
p_positive = 0.9
"#;

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), RSGD_STABILITY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let out = run_into("run-stability", &config, dir, &["--seed", "42", "--jobs", jobs]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        fs::read(a.join("results.csv")).unwrap(),
        fs::read(b.join("results.csv")).unwrap()
    );
    assert_eq!(summary_without_header(&a), summary_without_header(&b));
    assert_eq!(summary_without_header(&a)["seed"], 42);
}

#[test]
fn different_seeds_differ() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), RSGD_STABILITY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into("run-stability", &config, &a, &["--seed", "1"])
        .status
        .success());
    assert!(run_into("run-stability", &config, &b, &["--seed", "2"])
        .status
        .success());
    assert_ne!(
        fs::read(a.join("results.csv")).unwrap(),
        fs::read(b.join("results.csv")).unwrap()
    );
}

#[test]
fn csv_headers_per_experiment_kind() {
    let tmp = TempDir::new().unwrap();
    let stab = write_config(tmp.path(), RSGD_STABILITY);
    let out = tmp.path().join("stab");
    assert!(run_into("run-stability", &stab, &out, &[]).status.success());
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), STABILITY_HEADER);

    let risk_dir = TempDir::new().unwrap();
    let risk = write_config(risk_dir.path(), SMALL_RISK);
    let out = risk_dir.path().join("risk");
    let result = run_into("run-risk", &risk, &out, &[]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), RISK_HEADER);
    // four trials and a mean row for each n
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
}

#[test]
fn identical_pair_has_zero_distance_everywhere() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        &RSGD_STABILITY.replace("pair = \"random\"", "pair = \"identical\""),
    );
    let out = tmp.path().join("out");
    let result = run_into("run-stability", &config, &out, &[]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.unwrap();
        assert_eq!(record[3].parse::<f64>().unwrap(), 0.0, "row {record:?}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn lower_bound_run_prints_threshold_line() {
    let tmp = TempDir::new().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/lowerbound_gd.toml");
    let result = run_into("run-lowerbound", config, tmp.path(), &[]);
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert!(
        stdout.contains("vs threshold 0.400000 (0.4 eta sqrt(D)) PASS"),
        "{stdout}"
    );
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.toml");
    let out = uaslab(&["run-stability", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let config = write_config(tmp.path(), RSGD_STABILITY);
    let out = run_into("run-risk", &config, &tmp.path().join("x"), &[]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write_config(tmp.path(), "experiment = \"stability\"\nbogus = 1\n");
    assert_eq!(uaslab(&["run-stability", "--config", &bad]).status.code(), Some(2));

    // dimension below min{T, 1/eta^2}
    let small = write_config(
        tmp.path(),
        "experiment = \"lower-bound\"\n[problem]\nn = 10\niterations = 101\ndim = 5\n[algorithm]\nname = \"gd\"\neta = 0.1\n",
    );
    let out = uaslab(&[
        "run-lowerbound",
        "--config",
        &small,
        "--out",
        tmp.path().join("y").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d >= min{T, 1/eta^2}"));
}

#[test]
fn eval_bounds_prints_closed_forms() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/stability_gd.toml");
    let out = uaslab(&["eval-bounds", "--config", config]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout.lines().find(|l| l.starts_with("bound_gd = ")).unwrap();
    let value: f64 = line.trim_start_matches("bound_gd = ").parse().unwrap();
    // L = 1, R = 1, n = 10, 100 steps of 0.1: min{2, 4 (1 + 1)}
    assert_eq!(value, 2.0);
}

#[test]
fn selfcheck_passes() {
    let out = uaslab(&["selfcheck", "--seed", "5"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() >= 4);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
}
