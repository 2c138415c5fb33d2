use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use csma_cli::ExperimentConfig;
use serde_json::Value;

const SQUARE: &str = r#"
[graph]
classes = 4
edges = [[0, 1], [0, 2], [1, 3], [2, 3]]

[params]
lambda = [0.4, 0.2, 0.3, 0.4]
nu = [4.0, 3.0, 3.0, 5.0]
mu = [1.0, 1.0, 1.0, 1.0]
"#;

fn csma(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_csma"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn config_round_trip_is_identity() {
    let text = format!(
        "{SQUARE}\n[sim]\nnodes = [4, 8]\nseed = 3\nt_end = 100.0\n\n[sweep]\nparameter = \"nu\"\nclass = 1\nvalues = [1.0, 2.0]\n"
    );
    let a = ExperimentConfig::from_toml(&text).unwrap();
    let b = ExperimentConfig::from_toml(&a.to_toml().unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
}

#[test]
fn enumerate_counts_states() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (SQUARE.to_string(), 7),
        ("[graph]\nclasses = 4\ntopology = \"complete\"\n[params]\nlambda = [0.1, 0.1, 0.1, 0.1]\nnu = [1.0, 1.0, 1.0, 1.0]\nmu = [1.0, 1.0, 1.0, 1.0]\n".into(), 5),
        ("[graph]\nclasses = 3\ntopology = \"edgeless\"\n[params]\nlambda = [0.1, 0.1, 0.1]\nnu = [1.0, 1.0, 1.0]\nmu = [1.0, 1.0, 1.0]\n".into(), 8),
    ];
    for (cfg, size) in cases {
        let v = json(&csma(dir.path(), &cfg, &["enumerate"]));
        assert_eq!(v["size"], size, "{v}");
    }
}

#[test]
fn zero_load_has_zero_activity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[graph]\nclasses = 2\ntopology = \"complete\"\n[params]\nlambda = [0.0, 0.0]\nnu = [1.0, 2.0]\nmu = [1.0, 1.0]\n";
    let v = json(&csma(dir.path(), cfg, &["fixed-point"]));
    assert_eq!(v["xi"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["stable"], true);
}

#[test]
fn unstable_parameters_report_varrho() {
    let dir = tempfile::tempdir().unwrap();
    // ϱ = 0.6 + 0.6 = 1.2.
    let cfg = "[graph]\nclasses = 1\ntopology = \"complete\"\n[params]\nlambda = [0.6]\nnu = [1.0]\nmu = [1.0]\n";
    let v = json(&csma(dir.path(), cfg, &["fixed-point"]));
    assert_eq!(v["stable"], false);
    assert!((v["varrho"].as_f64().unwrap() - 1.2).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = format!("{SQUARE}\nbogus = 1\n");
    assert_eq!(
        csma(dir.path(), &bad_key, &["enumerate"]).status.code(),
        Some(2)
    );
    // Total load above one leaves the capacity region.
    let overload = "[graph]\nclasses = 2\ntopology = \"complete\"\n[params]\nlambda = [0.7, 0.6]\nnu = [1.0, 1.0]\nmu = [1.0, 1.0]\n";
    assert_eq!(
        csma(dir.path(), overload, &["fixed-point"]).status.code(),
        Some(3)
    );
    let missing = Command::new(env!("CARGO_BIN_EXE_csma"))
        .args(["enumerate", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    // Simulation requested without a [sim] block.
    assert_eq!(
        csma(dir.path(), SQUARE, &["simulate"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[graph]\nclasses = 2\ntopology = \"complete\"\n[params]\nlambda = [0.1]\nnu = [1.0, 1.0]\nmu = [1.0, 1.0]\n";
    let out = csma(dir.path(), cfg, &["enumerate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.lambda"));
}

#[test]
fn simulate_is_reproducible_and_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SQUARE}\n[sim]\nnodes = [4, 8]\nseed = 11\nt_end = 2000.0\nreplicas = 2\n");
    let first = csma(dir.path(), &cfg, &["simulate"]);
    let a = fs::read(dir.path().join("out/simulate.json")).unwrap();
    let csv_a = fs::read(dir.path().join("out/waiting_N4.csv")).unwrap();
    let second = csma(dir.path(), &cfg, &["simulate"]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(a, fs::read(dir.path().join("out/simulate.json")).unwrap());
    assert_eq!(
        csv_a,
        fs::read(dir.path().join("out/waiting_N4.csv")).unwrap()
    );

    let v = json(&second);
    let hash = v["config_hash"].as_str().unwrap().to_string();
    assert_eq!(v["seed"], 11);
    let csv = String::from_utf8(csv_a).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.contains("config_hash") && header.contains("seed"));
    assert!(csv.lines().skip(1).all(|l| l.contains(&hash)));

    let other = csma(dir.path(), &cfg, &["simulate", "--seed", "12"]);
    assert_ne!(json(&other)["points"], v["points"]);
}

#[test]
fn sweep_flips_stability_where_varrho_crosses_one() {
    let dir = tempfile::tempdir().unwrap();
    // ϱ = 2λ with ν = μ = 1.
    let cfg = "[graph]\nclasses = 1\ntopology = \"complete\"\n[params]\nlambda = [0.2]\nnu = [1.0]\nmu = [1.0]\n\n[sweep]\nparameter = \"lambda\"\nclass = 0\nvalues = [0.3, 0.45, 0.4999, 0.5001, 0.55, 0.7]\n";
    let v = json(&csma(dir.path(), cfg, &["sweep"]));
    let rows = v["points"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        let varrho = r["varrho"].as_f64().unwrap();
        assert_eq!(r["stable"].as_bool().unwrap(), varrho < 1.0, "{r}");
    }
    assert!(fs::read_to_string(dir.path().join("out/sweep.csv"))
        .unwrap()
        .starts_with("value,"));
}

#[test]
fn ode_and_compare_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SQUARE}\n[meanfield]\nn_max = 32\nhorizon = 5.0\nstore_every = 50\n\n[sim]\nnodes = [4]\nseed = 5\nt_end = 5000.0\nreplicas = 2\n"
    );
    let ode = json(&csma(dir.path(), &cfg, &["ode"]));
    assert!(ode["final_drift_norm"].as_f64().unwrap().is_finite());
    let traj = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,class,level,probability,config_hash,seed"));

    let cmp = json(&csma(dir.path(), &cfg, &["compare"]));
    assert_eq!(cmp["points"].as_array().unwrap().len(), 1);
    let table = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    assert!(table
        .lines()
        .next()
        .unwrap()
        .starts_with("N,class,metric,value"));
}
