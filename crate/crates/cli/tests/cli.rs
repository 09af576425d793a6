use std::path::Path;
use std::process::{Command, Output};

fn cutstack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutstack")).args(args).output().expect("binary runs")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_all_subset_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = cutstack(&["run-all", "--only", "simulate", "--out-dir", d.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (da, db) = (dir_bytes(a.path()), dir_bytes(b.path()));
    let names: Vec<&str> = da.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["cylinders.csv", "entropy.csv", "summary.json", "trajectory.csv"]);
    assert_eq!(da, db);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_pass"], true);
    let ids: Vec<u64> = summary["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, [8, 12]);
}

#[test]
fn failing_criterion_sets_exit_code_and_failure_list() {
    let d = tempfile::tempdir().unwrap();
    let out = cutstack(&["run-all", "--only", "tests", "--out-dir", d.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["failures"], serde_json::json!([7]));
    assert!(d.path().join("kraft.csv").exists());
}

#[test]
fn invalid_config_reports_position() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.json");
    std::fs::write(&p, "{\n  \"seed\": 3,\n  \"r\": \n}\n").unwrap();
    let out = cutstack(&["--config", p.to_str().unwrap(), "build"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4 column 1"), "{err}");

    std::fs::write(&p, r#"{"r": "1/3"}"#).unwrap();
    let out = cutstack(&["--config", p.to_str().unwrap(), "build"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_suite_is_rejected() {
    let out = cutstack(&["run-all", "--only", "tests,bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn compress_generator_to_stdout() {
    let out = cutstack(&["compress", "--generator", "zeros", "--length", "4096", "--every", "1024"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("prefix_length,codelength,ratio,proxy_deficiency"));
    let ratios: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 4);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn compress_reads_bit_files() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("x.txt");
    std::fs::write(&p, "0110 1001\n1100\n").unwrap();
    let out = cutstack(&["compress", "--input", p.to_str().unwrap(), "--every", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["4", "8", "12"]);

    std::fs::write(&p, "01\n0a\n").unwrap();
    let out = cutstack(&["compress", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2 column 2"));
}

#[test]
fn build_writes_construction_tables() {
    let d = tempfile::tempdir().unwrap();
    let out = cutstack(&["--seed", "5", "--out-dir", d.path().to_str().unwrap(), "build"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = dir_bytes(d.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["construction.csv", "construction.json", "invariants.csv"]);
}
