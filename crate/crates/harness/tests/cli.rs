use std::process::Command;

fn pcl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pcl")).args(args).output().unwrap()
}

#[test]
fn run_writes_outputs_and_flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"problem": "grid", "users": 2, "iters": 50, "alpha": 0.5}"#).unwrap();
    let out = dir.path().join("out");
    let o = pcl(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--iters",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    // At most four iterations for each of the two users.
    let rows = metrics.lines().count() - 1;
    assert!((2..=8).contains(&rows), "{rows} rows");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["iters"], 4);
    assert_eq!(summary["config"]["alpha"], 0.5);
}

#[test]
fn validate_reports_sizes() {
    let o = pcl(&["validate", "--problem", "hotel"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["parts"], 15);
    assert_eq!(v["features"], 140);
}

#[test]
fn certify_exits_nonzero_for_improvable_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let weights = dir.path().join("w.json");
    let config = dir.path().join("x.json");
    let v = pcl(&["validate", "--problem", "grid"]);
    let sizes: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    let m = sizes["features"].as_u64().unwrap() as usize;
    let n = sizes["variables"].as_u64().unwrap() as usize;
    std::fs::write(&weights, serde_json::to_string(&vec![1.0; m]).unwrap()).unwrap();

    // A checkerboard separates every pair of neighbours: the global optimum under
    // all-ones weights. Given as a name map.
    let board: serde_json::Map<String, serde_json::Value> = (0..4)
        .flat_map(|r| (0..4).map(move |c| (format!("n{r}{c}"), serde_json::json!((r + c) % 2))))
        .collect();
    std::fs::write(&config, serde_json::Value::Object(board).to_string()).unwrap();
    let o = pcl(&[
        "certify",
        "--problem",
        "grid",
        "--weights",
        weights.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));

    std::fs::write(&config, serde_json::to_string(&vec![0; n]).unwrap()).unwrap();
    let o = pcl(&[
        "certify",
        "--problem",
        "grid",
        "--weights",
        weights.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dump_gai_lists_the_ordering() {
    let o = pcl(&["dump-gai", "--problem", "grid"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ordering"].as_array().unwrap().len(), 4);
}

#[test]
fn unknown_problem_fails() {
    let o = pcl(&["validate", "--problem", "/nonexistent/problem.json"]);
    assert!(!o.status.success());
}
