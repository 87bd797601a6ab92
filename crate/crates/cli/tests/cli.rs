use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn reencoder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reencoder")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = reencoder(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn reencode_default_totals() {
    let v: Value = serde_json::from_str(&stdout(&["reencode"])).unwrap();
    let total = v["total_success_probability"].as_f64().unwrap();
    assert!((total - 0.25).abs() < 1e-12);
    let classes = v["class_probability"].as_array().unwrap();
    assert_eq!(classes.len(), 4);
    for c in classes {
        assert!((c[1].as_f64().unwrap() - 0.0625).abs() < 1e-12);
    }
    let patterns = v["patterns"].as_array().unwrap();
    assert_eq!(patterns.len(), 16);
    assert!(patterns.iter().all(|p| p["fidelity"].as_f64().unwrap() > 1.0 - 1e-12));
}

#[test]
fn perfect_mismatch_equals_no_mismatch() {
    for cmd in ["reencode", "z90"] {
        assert_eq!(stdout(&[cmd]), stdout(&[cmd, "--mismatch", "1.0", "1.0"]));
    }
}

#[test]
fn z90_csv_table() {
    let text = stdout(&["z90", "--csv", "--alpha-theta", "1.1", "--alpha-phi", "-0.4"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pattern,probability,flip_class,fidelity");
    assert_eq!(lines.len(), 17);
    assert!(lines[1..].iter().all(|l| l.ends_with(",1.000000000000")));
}

#[test]
fn sweep_pins_and_format() {
    let text = stdout(&["mismatch-sweep", "--grid", "5"]);
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().next().unwrap(), "eta1,eta2,f_ave,p_plus_mean,p_minus_mean");
    assert!(text.contains("\n0.000000000000,0.000000000000,0.500000000000,"));
    assert!(text.contains("\n1.000000000000,1.000000000000,1.000000000000,"));
    assert_eq!(csv_rows(&text).len(), 25);
    assert_eq!(text, stdout(&["mismatch-sweep", "--grid", "5"]));
}

#[test]
fn diagonal_cut_is_monotone() {
    let rows = csv_rows(&stdout(&["mismatch-sweep", "--cut", "diagonal"]));
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[0] == r[1]));
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
}

#[test]
fn teleport_is_reproducible_from_seed() {
    let args = ["teleport", "--trials", "2000", "--seed", "5", "--csv"];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    assert_ne!(a, stdout(&["teleport", "--trials", "2000", "--seed", "6", "--csv"]));
    let unlimited = a.lines().find(|l| l.starts_with("unlimited,")).unwrap();
    assert!(unlimited.starts_with("unlimited,2000,1.000000000000,"));
}

#[test]
fn pdc_report() {
    let v: Value = serde_json::from_str(&stdout(&["pdc", "--chi", "0.01", "--order", "3"])).unwrap();
    let ratio = v["eight_to_six_ratio"].as_f64().unwrap();
    assert!((1e-5..=1e-3).contains(&ratio));
    assert_eq!(v["p_contaminated_sixfold"].as_f64().unwrap(), 0.0);
    assert!(v["p_contaminated_fourfold"].as_f64().unwrap() > 0.0);
}

#[test]
fn selftest_passes_and_faults_fail() {
    let ok = reencoder(&["selftest"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 7);

    let qwp = reencoder(&["selftest", "--fault", "qwp-phase"]);
    assert_eq!(qwp.status.code(), Some(2));
    let text = String::from_utf8(qwp.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("quarter-wave plate")));

    let pbs = reencoder(&["selftest", "--fault", "pbs-phase"]);
    assert_eq!(pbs.status.code(), Some(2));
    let text = String::from_utf8(pbs.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL") && l.contains("type-I heralded expansion")));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["nonsense"],
        vec!["reencode", "--eta1", "1.5"],
        vec!["reencode", "--json", "--csv"],
        vec!["pdc", "--chi", "0.5"],
        vec!["pdc", "--order", "7"],
        vec!["mismatch-sweep", "--grid", "1"],
        vec!["reencode", "--fault", "pbs-phase"],
        vec!["teleport", "--trials", "0"],
        vec![],
    ] {
        let out = reencoder(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(reencoder(&["--help"]).status.code(), Some(0));
}

#[test]
fn manifest_with_flag_precedence() {
    let path = scratch("run.manifest");
    std::fs::write(&path, "# sweep\ncommand = mismatch-sweep\ngrid = 3\nformat = csv\n").unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(csv_rows(&stdout(&["--manifest", p])).len(), 9);
    assert_eq!(csv_rows(&stdout(&["--manifest", p, "--grid", "2"])).len(), 4);
    assert_eq!(stdout(&["--manifest", p]), stdout(&["mismatch-sweep", "--grid", "3"]));

    let bad = scratch("bad.manifest");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(reencoder(&["reencode", "--manifest", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn out_flag_writes_file() {
    let path = scratch("sweep.csv");
    let _ = std::fs::remove_file(&path);
    let printed = stdout(&["mismatch-sweep", "--grid", "2", "--out", path.to_str().unwrap()]);
    assert!(printed.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&["mismatch-sweep", "--grid", "2"]));
}
