use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn parareg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parareg")).current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("report.json")).unwrap()
}

const GRID: &str = r#""grid": {"dim": 1, "n_t": 32, "n_x": 32, "len_t": 6.283185307179586, "len_x": 6.283185307179586}"#;

fn pipeline_config(delta_grid: &str) -> String {
    format!(
        r#"{{"preset": "heat", {GRID}, "initial": {{"kind": "sine", "mode": 1, "amplitude": 1.0}},
            "eps_list": [0.32, 0.16, 0.08, 0.04], "delta_grid": {delta_grid}}}"#
    )
}

#[test]
fn pipeline_passes_and_writes_report_and_series() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "cfg.json", &pipeline_config("[0.0, 0.1, 0.2, 0.3]"));
    let out = parareg(t.path(), &["pipeline", "cfg.json", "--out", "run", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS pipeline"));
    let text = report(&t.path().join("run"));
    assert!(text.contains("\"schema_version\": 1"));
    assert!(t.path().join("run/series/manifest.json").exists());
}

#[test]
fn degenerate_delta_exits_one() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "cfg.json", &pipeline_config("[0.0]"));
    let out = parareg(t.path(), &["pipeline", "cfg.json", "-o", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(report(&t.path().join("run")).contains("\"verdict\": \"FAIL\""));
}

#[test]
fn worker_count_does_not_change_the_report() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "cfg.json", &pipeline_config("[0.0, 0.1, 0.2]"));
    for (w, dir) in [("1", "a"), ("4", "b")] {
        assert_eq!(parareg(t.path(), &["pipeline", "cfg.json", "-o", dir, "--workers", w]).status.code(), Some(0));
    }
    // Same config file, so the hash matches too.
    assert_eq!(report(&t.path().join("a")), report(&t.path().join("b")));
}

#[test]
fn solve_stores_a_readable_field() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "cfg.json", &pipeline_config("[0.0]"));
    let out = parareg(t.path(), &["solve", "cfg.json", "-o", "u"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let u = parareg::io::read_field(&t.path().join("u/u")).unwrap();
    assert_eq!(u.grid().n_x(), 32);
    assert!(report(&t.path().join("u")).contains("\"mass_drift\""));

    // The stored field feeds the holder verb.
    write(t.path(), "h.json", r#"{"field": {"kind": "file", "path": "u/u"}, "alpha": 0.25, "lines": [3, 8, 16]}"#);
    let out = parareg(t.path(), &["holder", "h.json", "-o", "h"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(t.path().join("h/lines.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn potential_round_trips() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "p.json",
        &format!(r#"{{{GRID}, "field": {{"kind": "gaussian", "width_t": 0.1, "width_x": 0.1}}, "space_order": [1.0, 2.0], "time_order": [0.5, 0.0], "q": 3.0}}"#),
    );
    let out = parareg(t.path(), &["potential", "p.json", "-o", "pot"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(t.path().join("pot/potential.bin").exists());
}

#[test]
fn interp_check_runs_the_suite() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "i.json", &format!(r#"{{{GRID}, "probes": 3, "combos": [[0.5, 3.0, 1.5]], "three_lines_probes": 1}}"#));
    let out = parareg(t.path(), &["interp-check", "i.json", "-o", "i"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(t.path().join("i/strip.csv")).unwrap().starts_with("a,b,re_h,im_h"));
}

#[test]
fn mihlin_respects_an_optional_bound() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "m.json", r#"{"dim": 2, "symbol": {"kind": "riesz", "axis": 0}}"#);
    assert_eq!(parareg(t.path(), &["mihlin", "m.json", "-o", "m"]).status.code(), Some(0));
    write(t.path(), "m2.json", r#"{"dim": 2, "symbol": {"kind": "riesz", "axis": 0}, "bound": 0.5}"#);
    assert_eq!(parareg(t.path(), &["mihlin", "m2.json", "-o", "m2"]).status.code(), Some(1));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(parareg(t.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(parareg(t.path(), &["pipeline", "missing.json"]).status.code(), Some(2));
    write(t.path(), "bad.json", r#"{"preset": "heat", "unknown_key": 1}"#);
    assert_eq!(parareg(t.path(), &["pipeline", "bad.json"]).status.code(), Some(2));
    write(t.path(), "cfg.json", &pipeline_config("[0.0, 0.1]").replace("heat", "plaplace-99"));
    assert_eq!(parareg(t.path(), &["pipeline", "cfg.json", "-o", "x"]).status.code(), Some(2));
    write(t.path(), "m.json", r#"{"dim": 1, "symbol": {"kind": "riesz", "axis": 3}}"#);
    assert_eq!(parareg(t.path(), &["mihlin", "m.json", "-o", "m"]).status.code(), Some(2));
    write(t.path(), "ok.json", &pipeline_config("[0.0]"));
    assert_eq!(parareg(t.path(), &["solve", "ok.json", "--workers", "0"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "m.json", r#"{"dim": 1, "symbol": {"kind": "identity"}}"#);
    write(t.path(), "taken", "a file, not a directory");
    assert_eq!(parareg(t.path(), &["mihlin", "m.json", "-o", "taken"]).status.code(), Some(3));
}
