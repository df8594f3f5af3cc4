use std::process::{Command, Output};

fn towerzeta(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_towerzeta"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("TOWERZETA_")) {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_kind(o: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).expect("json error object");
    v["error"]["kind"].as_str().unwrap().to_string()
}

#[test]
fn count_row() {
    let o = towerzeta(&["count", "T2", "--k", "1"], &[]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v, serde_json::json!({"k": 1, "affine": 4, "bad": 4, "total": 8}));
}

#[test]
fn count_table_schema() {
    let o = towerzeta(&["count", "T4", "--k", "2", "--table"], &[]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["curve"], "T4");
    assert_eq!(v["q"], 4);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn lpoly_text_and_json() {
    let o = towerzeta(&["lpoly", "T1", "--g", "0"], &[]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1\n");
    let o = towerzeta(&["lpoly", "Q4u0", "--g", "4", "--format", "json"], &[]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["g"], 4);
    assert_eq!(v["coeffs"][1], "8");
    assert_eq!(v["coeffs"][8], "256");
}

#[test]
fn wrong_genus_is_a_verification_failure() {
    let o = towerzeta(&["lpoly", "T3", "--g", "2"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "count_inconsistency");
}

#[test]
fn tower_four() {
    let o = towerzeta(&["tower", "--n", "4"], &[]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("(1-T+4T^2)^2 (1+3T+4T^2)^7"));
}

#[test]
fn usage_errors() {
    let o = towerzeta(&["count", "T2"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");
    let o = towerzeta(&["count", "X9", "--k", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "parse");
    let o = towerzeta(&["count", "T2", "--k", "1"], &[("TOWERZETA_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "budget = 64\n").unwrap();
    let o = towerzeta(&["--config", cfg.to_str().unwrap(), "count", "T3", "--k", "4"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "precondition");
    let o = towerzeta(&["--config", cfg.to_str().unwrap(), "--budget", "4096", "count", "T3", "--k", "4"], &[]);
    assert!(o.status.success());
}

#[test]
fn cached_output_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let env = [("TOWERZETA_CACHE", cache.to_str().unwrap())];
    let a = towerzeta(&["tower", "--n", "4", "--format", "json"], &env);
    assert!(cache.exists());
    let b = towerzeta(&["report", "--n", "4", "--format", "json"], &env);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn corrupt_cache_is_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    std::fs::write(&cache, "not json").unwrap();
    let o = towerzeta(&["--cache", cache.to_str().unwrap(), "count", "T2", "--k", "1"], &[]);
    assert!(o.status.success());
    assert!(dir.path().join("cache.json.corrupt.0").exists());
}
