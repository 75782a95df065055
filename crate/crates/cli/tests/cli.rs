use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qkdrate_core::RunConfig;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qkdrate"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const QUIET_POINT: &str = r#"{
  "channel": {"sigma_db_per_km": 0.2, "eta": 1.0, "receiver_loss_db": 0.0,
              "dark_count_prob": 0.0, "baseline_error": 0.0},
  "point": 0,
  "curves": [{"label": "ideal", "protocol": "bb84", "source": "ideal-single"}],
  "security": {"s": 0, "t": 0},
  "n_tot": 1000
}"#;

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = RunConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
            let again = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn noiseless_ideal_rate_is_half_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "quiet.json", QUIET_POINT);
    let out = run(&["rate", "--config", path_str(&cfg), "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["point"]["rate"], 0.5);
    assert_eq!(v[0]["budget"]["n_rec"], 500);
    assert_eq!(v[0]["budget"]["r"], 500);
}

#[test]
fn rate_report_at_100_km() {
    let cfg = configs().join("fiber_point_100km.json");
    let out = run(&["rate", "--config", path_str(&cfg)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Ekert ideal EPR at 100: rate 7.2"), "{text}");
    assert!(text.contains("no secure key"), "weak-pulse BB84 has no key at 100 km");

    let out = run(&["rate", "--config", path_str(&cfg), "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let epr = &v[0];
    assert!(epr["point"]["rate"].as_f64().unwrap() > 0.0);
    let e = epr["point"]["stats"]["e"].as_f64().unwrap();
    assert!((e - 0.023_426).abs() < 1e-6);
}

#[test]
fn invalid_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write_config(dir.path(), "bad.json", "{ \"channel\": ");
    let empty_grid = write_config(
        dir.path(),
        "empty.json",
        &QUIET_POINT.replace("\"point\": 0", "\"grid\": {\"start\": 10, \"stop\": 0, \"step\": 1}"),
    );
    let mismatch = write_config(dir.path(), "mismatch.json", &QUIET_POINT.replace("\"bb84\"", "\"ekert\""));
    for (cmd, cfg) in [("rate", &malformed), ("sweep", &empty_grid), ("rate", &mismatch), ("sweep", &malformed)] {
        let out = run(&[cmd, "--config", path_str(cfg)]);
        assert_eq!(out.status.code(), Some(2), "{cmd} {}", cfg.display());
    }
    let missing = run(&["rate", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let point_for_sweep = run(&["sweep", "--config", path_str(&configs().join("fiber_point_100km.json"))]);
    assert_eq!(point_for_sweep.status.code(), Some(2));
}

#[test]
fn sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig3a_fiber.json");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (x, y) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert!(!x.contains(&b'\r'));
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("curve,abscissa,rate_raw,rate_clamped,optimal_param,"));
    assert_eq!(text.lines().count(), 1 + 4 * 201);

    let j = dir.path().join("a.json");
    let o = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(&j), "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&fs::read(&j).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}

fn cutoffs(cfg: &str) -> Vec<(String, f64)> {
    let out = run(&["cutoff", "--config", path_str(&configs().join(cfg)), "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v.as_array()
        .unwrap()
        .iter()
        .map(|c| (c["label"].as_str().unwrap().to_string(), c["cutoff_km"].as_f64().unwrap()))
        .collect()
}

#[test]
fn fiber_bundle_cutoff_ordering() {
    let c = cutoffs("fig3a_fiber.json");
    let km = |label: &str| c.iter().find(|(l, _)| l == label).unwrap().1;
    assert!(km("BB84 Poisson") < km("BB84 ideal single photon"));
    assert!(km("BB84 ideal single photon") < km("Ekert PDC"));
    assert!(km("Ekert PDC") <= km("Ekert ideal EPR"));
}

#[test]
fn swaps_extend_the_cutoff() {
    let c = cutoffs("fig5_swaps.json");
    assert_eq!(c.len(), 3);
    assert!(c[0].1 < c[1].1 && c[1].1 < c[2].1, "{c:?}");
}

#[test]
fn optimize_reports_chi_below_one() {
    let out = run(&["optimize", "--config", path_str(&configs().join("fiber_point_100km.json")), "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let pdc = v.as_array().unwrap().iter().find(|r| r["label"] == "Ekert PDC").unwrap();
    let chi = pdc["param"].as_f64().unwrap();
    assert!(chi > 0.0 && chi < 1.0);
}

#[test]
fn verify_suites() {
    for suite in ["pdc-oracle", "attack-bound", "multi-photon"] {
        let out = run(&["verify", "--suite", suite]);
        assert!(out.status.success(), "{suite}");
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["passed"], true);
        for p in v["properties"].as_array().unwrap() {
            if p["informational"] == false {
                assert!(p["measured"].as_f64().unwrap() <= p["tolerance"].as_f64().unwrap() || suite == "multi-photon");
            }
        }
    }
    let out = run(&["verify", "--suite", "unknown"]);
    assert_eq!(out.status.code(), Some(2));
}
