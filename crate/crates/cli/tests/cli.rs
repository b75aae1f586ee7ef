use std::path::{Path, PathBuf};
use std::process::Command;

fn imcf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_imcf"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn schwarzschild_flow_has_unit_hawking_mass() {
    let dir = tempfile::tempdir().unwrap();
    let st = imcf()
        .args(["flow", "--config"])
        .arg(scenario("schwarzschild_flow.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("schwarzschild.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    let col = header.split(',').position(|c| c == "hawking").unwrap();
    let rows = data_rows(&csv);
    assert!(rows.len() > 100);
    for r in rows {
        let m: f64 = r[col].parse().unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }
    // Every column is documented.
    for c in header.split(',') {
        assert!(
            csv.lines().any(|l| l.starts_with(&format!("# {c}:"))),
            "{c}"
        );
    }
}

#[test]
fn outputs_are_deterministic_and_summaries_are_tagged() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let st = imcf()
            .args(["flow", "--config"])
            .arg(scenario("hyperbolic_flow.json"))
            .arg("--out")
            .arg(d.path())
            .output()
            .unwrap()
            .status;
        assert_eq!(st.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "hyperbolic.csv"), read(&b, "hyperbolic.csv"));
    let s: serde_json::Value =
        serde_json::from_slice(&read(&a, "hyperbolic.summary.json")).unwrap();
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(s["scenario_hash"].as_str().unwrap().len(), 64);
    assert_eq!(s["complete"], true);
    assert!(s["report"]["coarea"]["relative_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn exponent_outside_range_is_rejected_at_parse_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"metric": {"kind": "euclidean", "s_max": 10}, "green": {"p": 3.0}}"#,
    )
    .unwrap();
    let out = imcf()
        .args(["green", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(1, 3)"));
    // Nothing is computed, so no summary is written.
    assert!(!dir.path().join("green.summary.json").exists());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = imcf().args(["verify", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}

#[test]
fn runtime_failures_flag_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    // R outside the chart fails inside the computation, not at parse time.
    std::fs::write(
        &cfg,
        r#"{"metric": {"kind": "euclidean", "s_max": 2}, "green": {"r_outer": 5}}"#,
    )
    .unwrap();
    let st = imcf()
        .args(["flow", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(3));
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("flow.summary.json")).unwrap())
            .unwrap();
    assert_eq!(s["complete"], false);
    assert!(s["error"].as_str().unwrap().contains("outside the chart"));
}

#[test]
fn radial_suite_fails_only_on_known_red_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = imcf()
        .args(["verify", "radial", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let red: Vec<String> = data_rows(&csv)
        .into_iter()
        .filter(|r| r[6] == "0" && r[7] == "1")
        .map(|r| r[1].clone())
        .collect();
    assert_eq!(red, ["limit.sup_gap", "mql.schwarzschild_increasing"]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("perimeter_law.euclidean") && table.contains("FAIL"));
}

#[test]
fn mass_and_profile_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [
        ("mass", "schwarzschild_mass.json"),
        ("profile", "euclidean_profile.json"),
        ("metric", "kinked_metric.json"),
    ] {
        let st = imcf()
            .arg(cmd)
            .arg("--config")
            .arg(scenario(file))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status;
        assert_eq!(st.code(), Some(0), "{cmd}");
    }
    let csv = std::fs::read_to_string(dir.path().join("schwarzschild_mass.csv")).unwrap();
    let last: f64 = data_rows(&csv).last().unwrap()[3].parse().unwrap();
    assert!((0.98..=1.02).contains(&last));
}
