use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn lipbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lipbound"))
        .args(args)
        .env_remove("LIPBOUND_SEED")
        .output()
        .unwrap()
}

fn data(rel: &str) -> String {
    root().join("data").join(rel).to_string_lossy().into_owned()
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.code().is_some(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    let errors: Vec<String> = schema().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    v
}

#[test]
fn single_datum_cases() {
    for (name, want) in [
        ("z375_g25", 3.0 / 7.0),
        ("z125_g25", 0.2),
        ("z125_g5", 3.0 / 11.0),
        ("z25_g5", 1.0 / 3.0),
        ("z375_g875", 0.0),
    ] {
        let out = lipbound(&["pof", "-c", &data(&format!("single_datum/{name}.toml"))]);
        assert_eq!(out.status.code(), Some(0));
        let phat = report(&out)["results"]["phat"].as_f64().unwrap();
        assert!((phat - want).abs() < 1e-3, "{name}: {phat}");
    }
}

#[test]
fn every_subcommand_matches_the_schema() {
    let c = data("single_datum/z375_g25.toml");
    let runs: Vec<Vec<&str>> = vec![
        vec!["validate"],
        vec!["diameter"],
        vec!["diameter", "--k", "0"],
        vec!["pof", "--direction", "inf"],
        vec!["pof-curve", "--thetas", "-0.2,0,0.5,0.6"],
        vec!["envelope", "--grid", "5"],
        vec!["envelope", "--at", "0.9"],
        vec!["markov"],
        vec!["active-set"],
        vec!["active-set", "--objective", "diameter:0"],
        vec!["redundancy", "--region", "0.3:0.5"],
        vec!["fit-lipschitz", "--bounds", "0.5:2"],
        vec!["sweep", "--scale-L", "0.5,1,2"],
    ];
    for args in runs {
        let mut full = args.clone();
        full.extend(["-c", &c]);
        let out = lipbound(&full);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = report(&out);
        assert_eq!(v["command"], args[0]);
    }
}

#[test]
fn curve_saturates_past_the_mean() {
    let out = lipbound(&[
        "pof-curve",
        "-c",
        &data("single_datum/z25_g5.toml"),
        "--thetas",
        "0,0.5,0.7",
    ]);
    let v = report(&out);
    let rows = v["results"]["rows"].as_array().unwrap();
    assert_eq!(rows[1]["phat"].as_f64(), Some(1.0));
    assert_eq!(rows[2]["phat"].as_f64(), Some(1.0));
}

#[test]
fn infeasible_data_exit_one_and_name_the_pair() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "label,x,g\nlow,0.5,0\nhigh,0.5,1\n").unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "data = \"d.csv\"\ndomain = [[0.0, 1.0]]\nlipschitz = [1.0]\ntolerance = 0.5\nm = 0.5\ntheta = 0.0\n").unwrap();
    let out = lipbound(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = report(&out);
    assert_eq!(v["results"]["lipschitz_feasible"], false);
    assert_eq!(v["witness"]["labels"], serde_json::json!(["low", "high"]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("low and high"));
    let out = lipbound(&["pof", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lipbound(&["pof"]).status.code(), Some(2));
    assert_eq!(lipbound(&["frobnicate"]).status.code(), Some(2));
    let c = data("single_datum/z375_g25.toml");
    assert_eq!(
        lipbound(&["pof", "-c", &c, "--collapse", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lipbound(&["diameter", "-c", &c, "--k", "x"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "x,g\n0.2,0.1\n1.5,0.1\n").unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"data": "d.csv", "domain": [[0, 1]], "lipschitz": [1], "m": 0.5, "theta": 0}"#,
    )
    .unwrap();
    let out = lipbound(&["pof", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn reports_land_atomically_with_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let c = data("single_datum/z125_g5.toml");
    let o = lipbound(&[
        "pof-curve",
        "-c",
        &c,
        "--thetas",
        "0,0.25",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let trace = PathBuf::from(v["trace_path"].as_str().unwrap());
    let t = std::fs::read_to_string(trace).unwrap();
    assert!(t.starts_with("run,generation,best_value,feasibility_residual\n"));
    let curve = std::fs::read_to_string(dir.path().join("r.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 3);
}

#[test]
fn seed_comes_from_flag_env_or_config() {
    let c = data("single_datum/z375_g25.toml");
    let seed = |out: Output| report(&out)["seed"].as_u64().unwrap();
    assert_eq!(seed(lipbound(&["markov", "-c", &c])), 0);
    assert_eq!(seed(lipbound(&["markov", "-c", &c, "--seed", "7"])), 7);
    let env = Command::new(env!("CARGO_BIN_EXE_lipbound"))
        .args(["markov", "-c", &c])
        .env("LIPBOUND_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(seed(env), 11);
}

#[test]
fn replay_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let c = data("synthetic/synthetic_3d.toml");
    let o = lipbound(&[
        "pof",
        "-c",
        &c,
        "--collapse",
        "112",
        "--seed",
        "5",
        "-o",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = lipbound(&[
        "replay",
        first.to_str().unwrap(),
        "-o",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let load = |p: &Path| -> Value {
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        let m = v.as_object_mut().unwrap();
        m.remove("wall_time_s");
        m.remove("trace_path");
        v
    };
    assert_eq!(load(&first), load(&second));
    let ta = std::fs::read(dir.path().join("a.trace.csv")).unwrap();
    let tb = std::fs::read(dir.path().join("b.trace.csv")).unwrap();
    assert_eq!(ta, tb);
}
