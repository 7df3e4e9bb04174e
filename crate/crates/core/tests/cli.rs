use std::path::Path;
use std::process::{Command, Output};

fn demobench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demobench")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&demobench(&["--help"])), 0);
    assert_eq!(code(&demobench(&[])), 2);
    assert_eq!(code(&demobench(&["frobnicate"])), 2);
    assert_eq!(code(&demobench(&["experiment", "--feature", "sofa"])), 2);
}

#[test]
fn missing_scene_is_a_config_error() {
    let out = demobench(&["eval", "--scene", "/nonexistent/scene.json", "--model", "m.json", "--feature", "table"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn unreachable_hub_is_a_network_error() {
    // Bind and drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let out = demobench(&["record", "--connect", &addr, "--duration", "0.1", "--out", "x.jsonl"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn simulate_learn_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let out = demobench(&["simulate", "--feature", "table", "--count", "4", "--seed", "3", "--out-dir", p(&traces)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(&traces).unwrap().count(), 4);

    let model = dir.path().join("table.json");
    let out = demobench(&["learn", "--traces", p(&traces), "--epochs", "30", "--out", p(&model)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = demobench(&["eval", "--model", p(&model), "--feature", "table", "--samples", "500"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["feature"], "table");
    let mse = v["mse"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mse));

    let field = dir.path().join("field.csv");
    let out = demobench(&[
        "field", "--model", p(&model), "--min", "0,0,0", "--max", "1,1,1", "--resolution", "2,3,4", "--out", p(&field),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::metadata(&field).unwrap().len() > 0);
}

#[test]
fn learning_without_traces_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = demobench(&["learn", "--traces", p(dir.path()), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&out), 4);
}

#[test]
fn too_few_traces_for_a_trial_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = demobench(&["simulate", "--feature", "laptop", "--count", "2", "--out-dir", p(dir.path())]);
    assert_eq!(code(&out), 0);
    let out = demobench(&["experiment", "--feature", "laptop", "--traces-dir", p(dir.path()), "--per-trial", "5", "--trials", "1"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = demobench(&[
            "experiment", "--feature", "proxemics", "--trials", "2", "--per-trial", "3", "--pool", "5", "--samples", "500",
            "--seed", "11", "--out", p(&path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["trial_mse"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_reward_plan_is_the_straight_line() {
    let out = demobench(&["plan", "--start", "0,-1.2,1.0,-1.4,-1.57,0", "--goal", "0.5,-1.0,1.2,-1.5,-1.57,0.2", "--waypoints", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let waypoints = v["waypoints"].as_array().unwrap();
    assert_eq!(waypoints.len(), 5);
    let mid = waypoints[2]["q"].as_array().unwrap();
    assert!((mid[0].as_f64().unwrap() - 0.25).abs() < 1e-12);
}
