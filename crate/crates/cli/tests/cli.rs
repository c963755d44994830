use std::process::{Command, Output};

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_filippov"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn classify_reports() {
    let lin = json(&run(&["--builtin", "linear-crossing", "classify"], &[]));
    assert_eq!(lin["fractions"]["crossing_positive"], 1.0);
    let st = json(&run(&["--builtin", "stable-slide", "classify"], &[]));
    assert_eq!(st["fractions"]["sliding_stable"], 1.0);
    let esc = json(&run(&["--builtin", "escape-fold", "classify"], &[]));
    assert_eq!(esc["tangencies"].as_array().unwrap().len(), 1);
    assert!(esc["counts"]["crossing_negative"].as_u64().unwrap() > 0);
    assert!(esc["counts"]["sliding_unstable"].as_u64().unwrap() > 0);
}

#[test]
fn simulate_matches_linear_flow() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../systems/linear-crossing.json");
    let out = run(&["--config", cfg, "simulate", "0,-1", "--horizon", "1", "--format", "csv", "--step", "0.5"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,y,regime");
    assert_eq!(lines.last().unwrap(), &"1.000000,1.0000000000,-0.5000000000,minus");
}

#[test]
fn deterministic_output() {
    let args = ["--builtin", "bean-analogue", "--seed", "7", "transitivity", "--seeds", "3", "--glue"];
    let a = run(&args, &[]);
    let b = run(&args, &[("FILIPPOV_THREADS", "1")]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["certificate"]["status"], "certified_at_desk_scale");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--builtin", "nope", "classify"], &[]).status.code(), Some(2));
    assert_eq!(run(&["--config", "/nonexistent.json", "classify"], &[]).status.code(), Some(2));
    assert_eq!(run(&["classify"], &[]).status.code(), Some(2));
    assert_eq!(run(&["--builtin", "two-island", "transitivity", "--seeds", "2"], &[]).status.code(), Some(4));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("chatter.json");
    std::fs::write(
        &cfg,
        r#"{"dimension": 2, "h": "y", "zplus": ["1", "-1"], "zminus": ["1", "1"],
            "domain": {"min": [-3, -2], "max": [3, 2]}, "z_bound": 1.5,
            "tolerances": {"max_events": 0}}"#,
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "simulate", "0,0.5"], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--builtin", "bean-analogue", "--out", dir.path().to_str().unwrap(), "glue", "1.1,0.7", "1.25,1.3"],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for ext in ["json", "csv", "svg"] {
        assert!(dir.path().join(format!("glue.{ext}")).exists());
    }
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("glue.json")).unwrap()).unwrap();
    assert!(r["achieved_alpha"].as_f64().unwrap() < 0.1);
}

#[test]
fn distance_and_sequences() {
    let d = json(&run(&["--builtin", "escape-fold", "distance", "0.5,0:plus@1", "0.5,0:plus@1"], &[]));
    assert_eq!(d["value"], 0.0);
    let s = json(&run(&["--builtin", "escape-fold", "sigma-seq", "0.5,0:plus@1", "--tau", "3"], &[]));
    let entries = s["entries"].as_array().unwrap();
    let forward: Vec<_> = entries.iter().filter(|e| e["index"].as_i64().unwrap() > 0).collect();
    assert_eq!(forward.len(), 1);
    assert_eq!(forward[0]["sign"], 1);
    assert!((forward[0]["time"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let b = json(&run(&["--builtin", "escape-fold", "branches", "0.5,0", "--depth", "1", "--horizon", "6"], &[]));
    assert_eq!(b["leaves"].as_array().unwrap().len(), 29);
    let w = json(&run(&["--builtin", "bean-analogue", "witness", "--count", "3"], &[]));
    assert_eq!(w["glued"], 3);
}
