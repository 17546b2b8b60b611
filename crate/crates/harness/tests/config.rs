use std::path::Path;

use bbm_harness::config::{ClockChoice, ScenarioId};
use bbm_harness::{load_config, SimConfig};

fn err(json: &str) -> String {
    format!("{:#}", SimConfig::from_json(json).expect_err("config should be rejected"))
}

#[test]
fn minimal_dirac_gets_defaults() {
    let cfg = SimConfig::from_json(r#"{"scenario": "dirac1d", "params": {"c": 1.0}}"#).unwrap();
    assert_eq!(cfg.scenario, ScenarioId::Dirac1d);
    assert_eq!(cfg.dim(), 1);
    assert_eq!(cfg.param("a"), 0.0);
    assert_eq!(cfg.clock(), ClockChoice::Bridge);
    assert_eq!(cfg.dt(), 1e-3);
    assert_eq!(cfg.sim.replicas, 200);
    assert_eq!(cfg.sim.horizon, 10.0);
    assert_eq!(cfg.fit_window(), (5.0, 10.0));
    assert_eq!(cfg.start(), [0.0; 3]);
    assert!(cfg.fk.is_none() && cfg.pde.is_none());
}

#[test]
fn band_clock_default_step_follows_eps() {
    let cfg = SimConfig::from_json(r#"{"scenario": "sphere", "params": {"c": 2.0}, "sim": {"eps": 0.05}}"#).unwrap();
    assert_eq!(cfg.dim(), 3);
    assert_eq!(cfg.clock(), ClockChoice::Band);
    assert!((cfg.dt() - 2.5e-4).abs() < 1e-15);
}

#[test]
fn rejects_bad_values() {
    let cases = [
        (r#"{"scenario": "gaussian_bump", "params": {"mass": 1}, "directions": [[3, 4]]}"#, "directions[0]"),
        (r#"{"scenario": "dirac1d", "params": {"c": 1}, "directions": [[1, 0]]}"#, "directions[0]"),
        (r#"{"scenario": "dirac1d"}"#, "params.c"),
        (r#"{"scenario": "dirac1d", "params": {"c": 1, "z": 2}}"#, "params.z"),
        (r#"{"scenario": "sphere", "params": {"c": 1}, "sim": {"clock": "bridge"}}"#, "sim.clock"),
        (r#"{"scenario": "sphere", "params": {"c": 1}, "sim": {"eps": 0.05, "dt": 1e-3}}"#, "sim.dt"),
        (r#"{"scenario": "ball", "params": {"c": 1}, "sim": {"engine": "exact"}}"#, "sim.engine"),
        (r#"{"scenario": "dirac1d", "params": {"c": 1}, "sim": {"horizon": 10, "record_every": 3}}"#, "sim.record_every"),
        (r#"{"scenario": "dirac1d", "params": {"c": 1}, "deltas": [0.5, -1]}"#, "deltas[1]"),
        (r#"{"scenario": "sphere", "params": {"c": 1}, "dimension": 1}"#, "dimension"),
        (r#"{"scenario": "ball", "params": {"c": 1}, "pde": {"times": [1]}}"#, "pde"),
        (r#"{"scenario": "dirac1d", "params": {"c": 1}, "offspring": {"probabilities": [[2, 0.5]]}}"#, "offspring"),
    ];
    for (json, path) in cases {
        let msg = err(json);
        assert!(msg.contains(path), "{json}: expected {path} in {msg}");
    }
}

#[test]
fn rejects_unknown_keys() {
    for json in [
        r#"{"scenario": "dirac1d", "params": {"c": 1}, "extra": 1}"#,
        r#"{"scenario": "dirac1d", "params": {"c": 1}, "sim": {"dtt": 0.1}}"#,
        r#"{"scenario": "unknown"}"#,
    ] {
        assert!(err(json).starts_with("schema:"), "{json}");
    }
}

#[test]
fn serialised_config_reloads_unchanged() {
    let json = r#"{
        "scenario": "two_diracs", "params": {"c1": 0.5, "c2": 1.5, "a": 0.3},
        "offspring": {"geometric": 0.5}, "deltas": [0.25], "directions": [[-1.0]],
        "sim": {"horizon": 6, "record_every": 1, "fit_window": [2, 6]}, "fk": {"times": [1, 2]}
    }"#;
    let cfg = SimConfig::from_json(json).unwrap();
    assert_eq!(SimConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
