use std::fs;
use std::process::Command;

fn fieldrx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fieldrx"))
}

#[test]
fn validate_prints_resolved_config() {
    let out = fieldrx().args(["validate", "--profile", "span_30km", "--seed", "5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# config hash "));
    assert!(text.contains("profile = \"span_30km\""));
    assert!(text.contains("pilot_group_size = 3"));
}

#[test]
fn errors_are_json_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "profile = \"btb\"\n[frame]\npilot_groupsize = 2\n").unwrap();
    let out = fieldrx().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "config");

    fs::write(&path, "profile = \"btb\"\n[frame]\npilot_group_size = 3\n").unwrap();
    let out = fieldrx().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["error"]["message"].as_str().unwrap().contains("pilot_group_size"));
}

#[test]
fn run_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "profile = \"btb\"\nseed = 3\n[frame]\npayload_length = 1024\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = fieldrx()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let ber: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ber["mean"], 0.0);
    assert!(out_dir.join("manifest.json").exists());
    let out = fieldrx().arg("inspect").arg(out_dir.join("channel_estimate.bin")).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("matrix"));
}
