use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn downfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_downfold")).args(args).output().expect("spawn downfold")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("downfold-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_writes_json_report() {
    let dir = scratch("json");
    let out = dir.join("report.json");
    let h2 = fixture("h2_631g.fcidump");
    let o = downfold(&["run", "--fcidump", h2.to_str().unwrap(), "--active", "2", "--variants", "A1,A7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["variant"], "A1");
    assert_eq!(report["system"]["n_orbitals"], 4);
}

#[test]
fn json_reports_are_byte_identical() {
    let dir = scratch("determinism");
    let lih = fixture("lih_sto3g.fcidump");
    let mut texts = Vec::new();
    for i in 0..2 {
        let out = dir.join(format!("r{i}.json"));
        let o = downfold(&["run", "--fcidump", lih.to_str().unwrap(), "--active", "3", "--active", "4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        texts.push(fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn csv_and_text_formats() {
    let h2 = fixture("h2_631g.fcidump");
    let o = downfold(&["run", "--fcidump", h2.to_str().unwrap(), "--active", "3", "--format", "csv"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 8, "{csv}");
    let o = downfold(&["run", "--fcidump", h2.to_str().unwrap(), "--active", "3", "--variants", "A1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("A1") && text.contains("3 orbitals"), "{text}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("config");
    let cfg = dir.join("run.cfg");
    let h2 = fixture("h2_631g.fcidump");
    fs::write(&cfg, format!("fcidump = {}\nactive = 2\nvariants = A1\n", h2.display())).unwrap();
    let o = downfold(&["run", "--config", cfg.to_str().unwrap(), "--variants", "A3", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.contains("A3") && !csv.contains("A1,"), "{csv}");
}

#[test]
fn export_writes_fcidumps() {
    let dir = scratch("export");
    let h2 = fixture("h2_631g.fcidump");
    let heff = dir.join("heff");
    let o = downfold(&["run", "--fcidump", h2.to_str().unwrap(), "--active", "2", "--variants", "A1,A7", "--export-heff", heff.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_dir(&heff).unwrap().count(), 2);
}

#[test]
fn input_errors_exit_3() {
    assert_eq!(downfold(&["run", "--fcidump", "/does/not/exist", "--active", "2"]).status.code(), Some(3));
    assert_eq!(downfold(&["run", "--no-such-flag"]).status.code(), Some(3));
    let h2 = fixture("h2_631g.fcidump");
    let h2 = h2.to_str().unwrap();
    assert_eq!(downfold(&["run", "--fcidump", h2, "--active", "2", "--variants", "A9"]).status.code(), Some(3));
    assert_eq!(downfold(&["run", "--fcidump", h2]).status.code(), Some(3), "no active space");
}

#[test]
fn convergence_failure_exit_code() {
    let dir = scratch("convergence");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, format!("fcidump = {}\nactive = 3\nccsd-max-iter = 1\n", fixture("lih_sto3g.fcidump").display())).unwrap();
    let o = downfold(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_isolates_corrupt_geometry() {
    let dir = scratch("sweep");
    let bad = dir.join("bad.fcidump");
    fs::write(&bad, "&FCI NORB=2, NELEC=2\n&END\nnot a number 1 1 1 1\n").unwrap();
    let out = dir.join("sweep.csv");
    let h2 = fixture("h2_631g.fcidump");
    let lih = fixture("lih_sto3g.fcidump");
    let o = downfold(&[
        "sweep", "--fcidump", h2.to_str().unwrap(), "--fcidump", bad.to_str().unwrap(),
        "--fcidump", lih.to_str().unwrap(), "--active", "2", "--variants", "A7", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = csv.lines().skip(1).collect();
    assert_eq!(lines.iter().filter(|l| l.ends_with(",ok")).count(), 2, "{csv}");
    assert_eq!(lines.iter().filter(|l| l.contains("error")).count(), 1, "{csv}");
}

#[test]
fn empty_sweep_is_header_only() {
    let o = downfold(&["sweep"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}
