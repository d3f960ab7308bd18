use std::fs;

use fieldrx::runner::{
    numeric_artifacts, run_scenario, simulate, sweep, sweep_configs, sweep_to_dir, Profile, ScenarioConfig,
};

fn small(profile: Profile, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::for_profile(profile).with_seed(seed);
    c.frame.payload_length = 1024;
    c
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = small(Profile::Btb, 11);
    a.output_dir = dir.path().join("a");
    let mut b = a.clone();
    b.output_dir = dir.path().join("b");
    let ra = run_scenario(&a).unwrap();
    let rb = run_scenario(&b).unwrap();
    assert_eq!(ra.manifest.config_hash, rb.manifest.config_hash);
    let names = numeric_artifacts(&ra.manifest);
    assert!(names.len() > 10);
    for name in names {
        let x = fs::read(ra.dir.join(name)).unwrap();
        let y = fs::read(rb.dir.join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    assert_eq!(ra.outcome.ber.total_errors(), 0);
}

#[test]
fn persisted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Profile::Btb, 12);
    c.output_dir = dir.path().join("first");
    let first = run_scenario(&c).unwrap();
    let text = fs::read_to_string(first.dir.join("config.toml")).unwrap();
    let mut again = ScenarioConfig::from_toml_str(&text, None).unwrap();
    assert_eq!(again.hash().unwrap(), first.manifest.config_hash);
    again.output_dir = dir.path().join("second");
    let second = run_scenario(&again).unwrap();
    for name in numeric_artifacts(&first.manifest) {
        assert_eq!(fs::read(first.dir.join(name)).unwrap(), fs::read(second.dir.join(name)).unwrap());
    }
}

#[test]
fn span_manifest_records_profile_pins() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Profile::Span30km, 13);
    c.frame.payload_length = 2048;
    c.output_dir = dir.path().to_path_buf();
    let r = run_scenario(&c).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(r.dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["pilot_group_size"], 3);
    assert_eq!(m["profile"], "span_30km");
    assert!(m["cd_psnm"].as_f64().unwrap() != 0.0);
    assert_eq!(m["seed"], 13);
    assert!((m["estimated_cd_psnm"].as_f64().unwrap() - 510.0).abs() < 5.1);
}

#[test]
fn sweep_echoes_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Profile::Btb, 20);
    c.output_dir = dir.path().to_path_buf();
    let values = [0.05, 0.1, 0.2];
    let rows = sweep_to_dir(&c, "frame.pilot_percentage", &values, 1).unwrap();
    assert_eq!(rows.len(), 3);
    for (r, v) in rows.iter().zip(values) {
        assert_eq!(r.value, v);
        assert_eq!(r.bit_errors, 0);
    }
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("frame.pilot_percentage,"));
    for (l, v) in lines[1..].iter().zip(values) {
        assert_eq!(l.split(',').next().unwrap().parse::<f64>().unwrap(), v);
    }
    for i in 0..3 {
        assert!(dir.path().join(format!("point_{i}/manifest.json")).exists());
    }
}

#[test]
fn single_point_sweep_equals_single_run() {
    let c = small(Profile::Btb, 21);
    let rows = sweep(&c, "frame.pilot_percentage", &[0.15], 1, false).unwrap();
    let single = simulate(&sweep_configs(&c, "frame.pilot_percentage", &[0.15]).unwrap()[0]).unwrap();
    assert_eq!(rows[0].mean_ber, single.ber.mean);
    assert_eq!(rows[0].bit_errors, single.ber.total_errors());
    assert_eq!(rows[0].mean_residual, single.mean_residual());
}

#[test]
fn sweep_points_do_not_depend_on_workers() {
    let c = small(Profile::Btb, 22);
    let values = [0.1, 0.2];
    let serial = sweep(&c, "frame.pilot_percentage", &values, 1, false).unwrap();
    let parallel = sweep(&c, "frame.pilot_percentage", &values, 2, false).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn bad_axis_is_rejected() {
    let c = small(Profile::Btb, 1);
    assert!(sweep(&c, "frame.no_such_field", &[1.0], 1, false).is_err());
    assert!(sweep(&c, "frame.pilot_percentage", &[], 1, false).is_err());
    assert!(sweep(&c, "frame.pilot_group_size", &[2.0], 1, false).is_err());
}
