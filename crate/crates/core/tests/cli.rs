use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geonet::io::{parse_net, write_net};
use geonet::net::{theta_sphere, Node, Rebuild};
use geonet::riemann::ChartPoint;
use serde_json::Value;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geonet"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(workspace())
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn perturbed_theta(dir: &Path) -> PathBuf {
    let net = theta_sphere(1.0).unwrap();
    let moved = net.with_points(&[(Node::Vertex(0), ChartPoint::new(0, 0.05, -0.03))], Rebuild::Warm).unwrap();
    let path = dir.join("perturbed.json");
    std::fs::write(&path, write_net(&moved).unwrap()).unwrap();
    path
}

#[test]
fn verify_reports_the_theta_net() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--net", "data/theta_sphere.json"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("report.json"));
    assert!(report["max_defect"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["classification"], "degenerate");
    assert!((report["length"].as_f64().unwrap() - 3.0 * PI).abs() < 1e-6);
}

#[test]
fn verify_of_a_moving_net_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let net = perturbed_theta(tmp.path());
    let out = run(&["verify", "--net", net.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    let failure = json(&tmp.path().join("out/failure.json"));
    assert_eq!(failure["exit_code"], 3);
    assert_eq!(failure["schema_version"], 1);
}

#[test]
fn validation_failures_exit_two_with_a_record() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--net", "data/zero_length_edge.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let failure = json(&tmp.path().join("failure.json"));
    assert_eq!(failure["kind"], "degenerate edge");
    assert_eq!(failure["exit_code"], 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let config = tmp.path().join("config.json");
    std::fs::write(&config, r#"{"schema_version": 1, "no_such_field": 3}"#).unwrap();
    let out = run(&["verify", "--config", config.to_str().unwrap()], &tmp.path().join("bad"));
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["solve"], &tmp.path().join("missing"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_returns_a_stationary_net_file() {
    let tmp = tempfile::tempdir().unwrap();
    let net = perturbed_theta(tmp.path());
    let out = run(&["solve", "--net", net.to_str().unwrap()], &tmp.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("out/net.json")).unwrap();
    let solved = parse_net(&text, None).unwrap();
    assert!(solved.max_defect().unwrap() < 1e-8);
    assert!((solved.length() - 3.0 * PI).abs() < 1e-6);
    assert_eq!(write_net(&solved).unwrap(), text);
    let trace = std::fs::read_to_string(tmp.path().join("out/trace.csv")).unwrap();
    assert!(trace.lines().count() > 2);
}

#[test]
fn regularize_makes_two_circles_good() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["regularize", "--net", "data/two_circles.json"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("report.json"));
    assert_eq!(report["good"], true);
    let (before, after) = (report["length_before"].as_f64().unwrap(), report["length"].as_f64().unwrap());
    assert!((before - after).abs() <= 1e-8 * before);
    let net = parse_net(&std::fs::read_to_string(tmp.path().join("net.json")).unwrap(), None).unwrap();
    assert!(net.graph().is_good());
    assert!(tmp.path().join("surgery.json").exists());
}

#[test]
fn workers_do_not_change_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["lipschitz", "--config", "data/lipschitz_torus.json"];
    let one = tmp.path().join("one");
    let two = tmp.path().join("two");
    assert!(run(&args, &one).status.success());
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    assert!(run(&with_workers, &two).status.success());
    for f in ["lipschitz.csv", "report.json"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(two.join(f)).unwrap(), "{f}");
    }
}
