use std::path::PathBuf;
use std::process::{Command, Output};

fn loqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loqc"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("spawn loqc")
}

fn manifest(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel).display().to_string()
}

#[test]
fn run_parity_file_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("summary.json");
    let out = loqc(&[
        "run",
        &manifest("circuits/parity.qc"),
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["pattern", "probability", "output_state"]);
    let total: f64 = reader
        .records()
        .map(|r| r.unwrap()[1].parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let p = summary["points"][0]["coincidence_probability"].as_f64().unwrap();
    // Input 000 with the output analyzer at 0° passes the correct |0⟩.
    assert!((p - 1.0 / 16.0).abs() < 1e-12);
}

#[test]
fn scanned_file_has_scan_column() {
    let out = loqc(&["run", &manifest("circuits/xor1_hom.qc")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("scan_value,pattern,probability"), "{text}");
}

#[test]
fn monte_carlo_run_reports_counts() {
    let out = loqc(&["run", &manifest("circuits/xor_single.qc"), "--engine", "mc", "--trials", "2000", "--seed", "9", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("pattern,probability,counts,output_state"));
    let counts: u64 = csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap()[2].parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, 2000);
}

#[test]
fn malformed_file_exits_with_parse_status() {
    let out = loqc(&["run", &manifest("tests/data/malformed/01_unknown_port.qc")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn usage_error_exits_with_parse_status() {
    assert_eq!(loqc(&["truth-table", "--engine", "quantum"]).status.code(), Some(2));
}

#[test]
fn unreachable_calibration_target_is_numeric_failure() {
    let out = loqc(&["calibrate", "--target", "0.999", "--param", "kappa", "--v12", "0.5"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_file_is_io_failure() {
    assert_eq!(loqc(&["run", "no/such/file.qc"]).status.code(), Some(1));
}

#[test]
fn truth_table_ideal_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("tt.json");
    let out = loqc(&["truth-table", "--json", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9, "{text}");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["aggregate_error"].as_f64(), Some(0.0), "{summary}");
}

#[test]
fn analyzer_scan_reports_peak() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("m.json");
    let out = loqc(&["scan-analyzer", "--input", "15,0,90", "--json", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let peak = summary["peak_deg"].as_f64().unwrap();
    assert!((peak - 75.0).abs() < 1e-6, "{summary}");
}
