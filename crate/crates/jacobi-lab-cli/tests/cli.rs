use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jacobi-lab"));
    c.env_remove("JACOBI_LAB_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(name)
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn harmonic_oscillator_report() {
    let path = sample("harmonic_oscillator.json");
    let v = ok_json(&[
        "morse",
        "verify",
        "--problem",
        path.to_str().unwrap(),
        "--grid",
        "200",
    ]);
    let r = &v["result"];
    assert_eq!(v["command"], "morse verify");
    assert_eq!(r["piecewise"], 3);
    assert_eq!(r["leray"], 3);
    assert_eq!(r["brute"], 3);
    assert_eq!(r["consistent"], true);
    assert_eq!(r["certificate"], "NOT_OPTIMAL");
    let times: Vec<f64> = r["conjugate"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["t"].as_f64().unwrap())
        .collect();
    assert_eq!(times.len(), 3);
    for (k, t) in times.iter().enumerate() {
        assert!((t - (k + 1) as f64 * std::f64::consts::PI).abs() < 0.05);
    }
    assert!(r.get("timing").is_none());
}

#[test]
fn free_particle_has_no_conjugate_points() {
    let v = ok_json(&[
        "jacobi",
        "run",
        "--builtin",
        "free_particle",
        "--t-max",
        "10",
        "--grid",
        "40",
    ]);
    let r = &v["result"];
    assert_eq!(r["conjugate"].as_array().unwrap().len(), 0);
    assert_eq!(r["times"].as_array().unwrap().len(), 41);
    assert_eq!(r["planes"].as_array().unwrap().len(), 41);
}

#[test]
fn config_is_embedded() {
    let v = ok_json(&[
        "morse",
        "verify",
        "--builtin",
        "harmonic_oscillator",
        "--t-max",
        "4",
        "--grid",
        "30",
        "--seed",
        "9",
        "--tol",
        "1e-9",
    ]);
    let c = &v["config"];
    assert_eq!(c["builtin"], "harmonic_oscillator");
    assert_eq!(c["grid"], 30);
    assert_eq!(c["seed"], 9);
    assert_eq!(c["tol"], 1e-9);
    assert_eq!(c["t_max"], 4.0);
    assert_eq!(c["quadrature_order"], 4);
    assert_eq!(v["result"]["brute"], 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let sweep = [
        "morse", "sweep", "--count", "4", "--grid", "24", "--seed", "3",
    ];
    let first = run(&sweep);
    let second = run(&sweep);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let mut serial = sweep.to_vec();
    serial.extend(["--jobs", "1"]);
    let (va, vb): (Value, Value) = (
        serde_json::from_slice(&first.stdout).unwrap(),
        serde_json::from_slice(&run(&serial).stdout).unwrap(),
    );
    assert_eq!(va["result"], vb["result"]);
    assert_eq!(va["result"]["all_consistent"], true);
    assert_eq!(va["result"]["instances"].as_array().unwrap().len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("report.json");
    let verify = [
        "morse",
        "verify",
        "--builtin",
        "harmonic_oscillator",
        "--t-max",
        "5",
        "--grid",
        "40",
    ];
    let mut to_file = verify.to_vec();
    to_file.extend(["--report", file.to_str().unwrap()]);
    assert!(run(&to_file).stdout.is_empty());
    let mut from_file: Value = serde_json::from_slice(&std::fs::read(&file).unwrap()).unwrap();
    from_file["config"]["output"] = Value::Null;
    assert_eq!(
        from_file,
        serde_json::from_slice::<Value>(&run(&verify).stdout).unwrap()
    );
}

#[test]
fn malformed_problem_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"type": "lq", "A": [[0.0]"#).unwrap();
    let out = run(&["morse", "verify", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem file"));

    std::fs::write(
        &bad,
        r#"{"type":"lq","A":[[0.0]],"B":[[1.0]],"W":[[0.0, 1.0]],"R":[[1.0]],"T":1.0}"#,
    )
    .unwrap();
    let out = run(&["morse", "verify", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    let out = run(&["jacobi", "run", "--problem", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_options_exit_2() {
    for args in [
        &[
            "morse",
            "verify",
            "--builtin",
            "free_particle",
            "--t-max",
            "1",
            "--tol=-1",
        ][..],
        &[
            "morse",
            "verify",
            "--builtin",
            "free_particle",
            "--t-max",
            "1",
            "--grid",
            "0",
        ][..],
        &["morse", "verify", "--builtin", "free_particle"][..],
        &["morse", "verify", "--builtin", "nope", "--t-max", "1"][..],
        &[
            "glue",
            "demo",
            "--builtin",
            "free_particle",
            "--t-max",
            "1",
            "--split",
            "2",
        ][..],
        &["morse", "sweep", "--jobs", "0"][..],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let stiff = dir.path().join("stiff.json");
    std::fs::write(
        &stiff,
        r#"{"type":"lq","A":[[300.0]],"B":[[1.0]],"W":[[-1.0]],"R":[[1.0]],"T":10.0}"#,
    )
    .unwrap();
    let out = run(&[
        "morse",
        "verify",
        "--problem",
        stiff.to_str().unwrap(),
        "--grid",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_output() {
    let out = run(&[
        "morse",
        "verify",
        "--builtin",
        "harmonic_oscillator",
        "--t-max",
        "10",
        "--grid",
        "100",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let col = |name: &str| &rows[0][headers.iter().position(|h| h == name).unwrap()];
    assert_eq!(col("piecewise"), "3");
    assert_eq!(col("brute"), "3");
    assert_eq!(col("consistent"), "true");
}

#[test]
fn index_query_file() {
    let out = ok_json(&[
        "indices",
        "--problem",
        sample("kashiwara_query.json").to_str().unwrap(),
    ]);
    assert_eq!(out["result"]["op"], "kashiwara");
    assert_eq!(out["result"]["halves"], -2);

    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("ind.json");
    std::fs::write(&q, r#"{"op":"ind","planes":[[[0.0],[1.0]],[[1.0],[0.0]]]}"#).unwrap();
    let out = ok_json(&["indices", "--problem", q.to_str().unwrap()]);
    assert_eq!(out["result"]["value"], 0.5);
}

#[test]
fn glue_demo_matches_direct_pair() {
    let v = ok_json(&[
        "glue",
        "demo",
        "--builtin",
        "harmonic_oscillator",
        "--t-max",
        "4",
        "--split",
        "1.5",
        "--grid",
        "40",
    ]);
    let r = &v["result"];
    assert!(r["residual"].as_f64().unwrap() < 1e-8);
    assert!(r["boundary_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["glued"]["n"], 2);
}

#[test]
fn problems_lists_builtins() {
    let v = ok_json(&["problems"]);
    let names: Vec<&str> = v["result"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"harmonic_oscillator"));
    assert!(names.contains(&"isotropic_oscillator_2d"));
}

#[test]
fn sample_problems_are_consistent() {
    for name in [
        "free_particle.json",
        "lq_line_start.json",
        "switched_oscillator.json",
    ] {
        let path = sample(name);
        let v = ok_json(&[
            "morse",
            "verify",
            "--problem",
            path.to_str().unwrap(),
            "--grid",
            "80",
        ]);
        assert_eq!(v["result"]["consistent"], true, "{name}");
    }
}
