//! End-to-end tests of the command-line binary: configuration rejection
//! with precise diagnostics, artifact layout, deterministic reruns, and
//! typed round-trips of the emitted reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lindqed_cli::commands::ValidationReport;

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_lindqed"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn dir_entries(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    }
}

fn spin_config(out_dir: &Path, extra: &str) -> String {
    format!(
        r#"{{
  "model": {{ "kind": "spin", "field_strength": 1.0,
              "cutoff": {{ "kind": "gauss", "scale": 1.0 }} }},
  "fock": {{ "n_max": 1, "radial_panels": 6, "sphere_order": 2 }},
  "experiment": {{ "ops": ["populations"], "g_grid": [0.2],
                   "t_grid": [0.0, 0.5, 1.0] }},
  "output": {{ "directory": {dir:?} }}{extra}
}}"#,
        dir = out_dir.display().to_string(),
        extra = extra
    )
}

#[test]
fn corrupt_json_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let cfg = write_config(tmp.path(), "{ \"model\": { \"kind\": ");
    let res = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("config schema violation"), "stderr: {err}");
    assert!(err.contains("line"), "diagnostic lacks position: {err}");
    assert!(dir_entries(&out).is_empty(), "partial files written");
}

#[test]
fn unknown_key_rejected_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &spin_config(&out, ",\n  \"experimnt\": {}"));
    let res = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("experimnt"), "unknown key not named: {err}");
    assert!(err.contains("line"), "diagnostic lacks position: {err}");
}

#[test]
fn semantic_violation_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let body = spin_config(&out, "").replace("\"field_strength\": 1.0", "\"field_strength\": -1.0");
    let cfg = write_config(tmp.path(), &body);
    let res = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("positive"), "stderr: {err}");
    assert!(dir_entries(&out).is_empty(), "partial files written");
}

#[test]
fn dimension_cap_exits_3_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let body = spin_config(&out, "")
        .replace("\"radial_panels\": 6", "\"radial_panels\": 6, \"dim_cap\": 10");
    let cfg = write_config(tmp.path(), &body);
    let res = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("numerical failure"), "stderr: {err}");
    assert!(dir_entries(&out).is_empty(), "partial files written");
}

#[test]
fn spin_rates_artifacts_have_downward_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &spin_config(&out, ""));
    let res = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = String::from_utf8_lossy(&res.stdout);
    assert_eq!(text.matches("OK").count(), 3, "summary: {text}");

    let csv = fs::read_to_string(out.join("rate_matrix.csv")).unwrap();
    assert!(csv.starts_with("from,to,rate\n"), "csv: {csv}");
    assert_eq!(csv.lines().count(), 1 + 4, "2×2 matrix rows");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("rate_matrix.json")).unwrap()).unwrap();
    let energies: Vec<f64> = json["energies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let m = |i: usize, j: usize| json["matrix"][i][j].as_f64().unwrap();
    let (hi, lo) = if energies[0] > energies[1] { (0, 1) } else { (1, 0) };
    assert!(m(hi, lo) > 0.0, "excited level must decay");
    assert_eq!(m(lo, hi), 0.0, "no upward transitions");
    assert!((m(hi, hi) + m(hi, lo)).abs() <= 1e-12, "row conservation");
    assert!(json["conservation_defect"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn single_level_model_yields_single_zero_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let body = format!(
        r#"{{
  "model": {{ "kind": "harmonic", "dimension": 1, "n_max": 0,
              "cutoff": {{ "kind": "gauss", "scale": 1.0 }} }},
  "fock": {{ "n_max": 1, "radial_panels": 4, "sphere_order": 2 }},
  "output": {{ "directory": {:?} }}
}}"#,
        out.display().to_string()
    );
    let cfg = write_config(tmp.path(), &body);
    let res = run(&["rates", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("rate_matrix.csv")).unwrap();
    assert_eq!(csv, "from,to,rate\n0,0,0\n");
}

#[test]
fn dry_run_echoes_config_and_computes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let cfg = write_config(tmp.path(), &spin_config(&out, ""));
    let res = run(&["validate", "--config", cfg.to_str().unwrap(), "--dry-run"]);
    assert_eq!(res.status.code(), Some(0));
    let echoed: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(echoed["model"]["kind"], "spin");
    assert_eq!(echoed["experiment"]["ops"][0], "populations");
    assert!(dir_entries(&out).is_empty(), "dry run must not write");
}

#[test]
fn evolve_population_table_starts_at_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &spin_config(&out, ""));
    let res = run(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("populations.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,m,j,P_exact,P_markov,gap"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let t: f64 = f[0].parse().unwrap();
        let (m, j): (usize, usize) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let p_exact: f64 = f[3].parse().unwrap();
        let p_markov: f64 = f[4].parse().unwrap();
        let gap: f64 = f[5].parse().unwrap();
        assert!((-1e-9..=1.0 + 1e-9).contains(&p_exact), "P_exact {p_exact}");
        assert!((-1e-9..=1.0 + 1e-9).contains(&p_markov), "P_markov {p_markov}");
        if t == 0.0 {
            let expected = if m == j { 1.0 } else { 0.0 };
            assert!((p_exact - expected).abs() <= 1e-12);
            assert!(gap <= 1e-12, "gap {gap} at t = 0");
        }
        rows += 1;
    }
    assert_eq!(rows, 3 * 2 * 2, "t × initial × level rows");
}

#[test]
fn rate_artifacts_are_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let (out1, out2) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&out1, &out2] {
        let cfg = write_config(tmp.path(), &spin_config(out, ""));
        let res = run(&["rates", "--config", cfg.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(0));
    }
    for name in ["rate_matrix.csv", "rate_matrix.json"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn validation_report_round_trips_under_its_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), &spin_config(&out, ""));
    let res = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("validation_report.json")).unwrap();
    let report: ValidationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.schema_version, 1);
    assert!(report.all_passed);
    assert!(!report.checks.is_empty());
    assert!(report.populations.is_some());
    // serializing the typed report and parsing it again is lossless
    let again: ValidationReport =
        serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(again.checks.len(), report.checks.len());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
}
