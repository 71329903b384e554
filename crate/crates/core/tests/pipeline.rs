use std::fs;

use num_complex::Complex64;
use parareg::mollify::{build_cutoff, Interval, Nested, NestedDomains};
use parareg::pipeline::*;
use parareg::solver::{initial_field, solve, Scheme, SolveConfig};
use parareg::structure::StructureSpec;
use parareg::{Error, Grid, GridFunction, Verdict};
use std::f64::consts::PI;

fn p3(n: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::heat(n);
    cfg.preset = Some("plaplace-3".into());
    cfg.delta_grid = (0..=10).map(|k| k as f64 * 0.05).collect();
    cfg
}

#[test]
fn heat_pipeline_passes() {
    let r = run_pipeline(&PipelineConfig::heat(32)).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.checks);
    let e = r.exponents.unwrap();
    let d = r.measured_delta;
    assert!(d > 0.0);
    assert!((e.alpha - 0.5 * (0.5 - 1.0 / (2.0 + d))).abs() < 1e-15);
    let s2 = r.step2.unwrap();
    assert_eq!(s2.pass_fraction, 1.0);
    assert!(s2.failing_lines.is_empty());
    let s1 = r.step1.unwrap();
    assert_eq!(s1.levels.len(), 3);
    assert!(s1.levels.iter().all(|l| l.quotient.is_finite() && l.quotient > 0.0));
    assert!(r.messages.iter().any(|m| m.contains("d = 1")));
}

#[test]
fn p_laplace_pipeline_reports_exponents_from_scan() {
    let r = run_pipeline(&p3(32)).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.checks);
    let d = r.measured_delta;
    assert!(d > 0.0 && d <= 0.5);
    let alpha = r.alpha_used.unwrap();
    assert!((alpha - 0.5 * (1.0 / 3.0 - 1.0 / (3.0 + d))).abs() < 1e-15);
    assert_eq!(r.step1.unwrap().eps_verdict, Verdict::Pass);
}

#[test]
fn zero_measured_delta_gives_a_clean_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::heat(32);
    cfg.delta_grid = vec![0.0];
    cfg.output_dir = Some(dir.path().to_path_buf());
    let r = run_pipeline(&cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.measured_delta, 0.0);
    assert!(r.exponents.is_none() && r.step1.is_none() && r.step2.is_none());
    assert!(r.messages.iter().any(|m| m.contains("alpha = 0")));
    let back = RegularityReport::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn zero_data_passes_with_zero_quotients() {
    let mut cfg = PipelineConfig::heat(32);
    cfg.initial = InitialData::Zero;
    let r = run_pipeline(&cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?} {:?}", r.checks, r.messages);
    let s1 = r.step1.unwrap();
    assert!(s1.levels.iter().all(|l| l.quotient == 0.0 && l.sup_lq == 0.0));
    assert!(r.step2.unwrap().lines.iter().all(|l| l.verdict == Verdict::Pass && l.lhs == 0.0));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = p3(32);
    cfg.output_dir = Some(a.path().to_path_buf());
    let ra = run_pipeline(&cfg).unwrap();
    cfg.output_dir = Some(b.path().to_path_buf());
    let rb = run_pipeline(&cfg).unwrap();
    assert_eq!(ra, rb);
    let series = |d: &std::path::Path| {
        let mut names: Vec<_> = fs::read_dir(d.join("series")).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        names.into_iter().map(|n| (n.clone(), fs::read(d.join("series").join(n)).unwrap())).collect::<Vec<_>>()
    };
    assert_eq!(series(a.path()), series(b.path()));
}

#[test]
fn report_round_trips() {
    let r = run_pipeline(&PipelineConfig::heat(32)).unwrap();
    let text = r.to_json().unwrap();
    assert_eq!(RegularityReport::from_json(&text).unwrap(), r);
    let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(RegularityReport::from_json(&bumped).is_err());
}

#[test]
fn empty_report_writes_only_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let r = RegularityReport::empty(Provenance {
        config_hash: String::new(),
        crate_name: "x".into(),
        crate_version: "0".into(),
        structure: "none".into(),
        seed: 0,
    });
    let m = emit_plots(&r, dir.path()).unwrap();
    assert!(m.files.is_empty());
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("manifest.json")]);
    assert_eq!(validate_series(dir.path()).unwrap(), m);
}

#[test]
fn heat_run_emits_five_valid_series() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_pipeline(&PipelineConfig::heat(32)).unwrap();
    let m = emit_plots(&r, dir.path()).unwrap();
    assert_eq!(m.files.len(), 5);
    assert!(m.files.iter().all(|f| f.rows > 0));
    assert_eq!(validate_series(dir.path()).unwrap(), m);
    let first = &m.files[0].name;
    let text = fs::read_to_string(dir.path().join(first)).unwrap();
    fs::write(dir.path().join(first), text.replacen(',', ";", 1)).unwrap();
    assert!(validate_series(dir.path()).is_err());
}

fn smooth_field(n: usize) -> GridFunction {
    let g = Grid::new(1, n, n, 2.0 * PI, 2.0 * PI, 1).unwrap();
    let chi = build_cutoff(&g, &NestedDomains::standard(&g)).unwrap();
    let u = GridFunction::from_real_fn(g, |t, x, _| (t.cos() + 2.0) * (x[0].sin() + 0.5 * (2.0 * x[0]).cos())).unwrap();
    chi.localize(&u).unwrap()
}

#[test]
fn smooth_field_passes_every_line_with_uniform_constant() {
    let v = smooth_field(64);
    let eps = [0.32, 0.16, 0.08, 0.04];
    let fam = mollified_family(&v, &eps).unwrap();
    let r = step2_line_analysis(&v, &eps, &fam, 0.25, 2.5, 0.95).unwrap();
    assert_eq!(r.pass_fraction, 1.0);
    // Lines inside the inner box, where v is not damped by the cutoff.
    let cs: Vec<f64> = r.lines[24..40].iter().filter_map(|l| l.c_line).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi <= 2.0 * lo, "{lo} {hi}");
}

#[test]
fn zero_field_passes_every_line() {
    let g = Grid::new(1, 32, 32, 2.0 * PI, 2.0 * PI, 1).unwrap();
    let v = GridFunction::zeros(g);
    let eps = [0.32, 0.16, 0.08];
    let fam = mollified_family(&v, &eps).unwrap();
    let r = step2_line_analysis(&v, &eps, &fam, 0.25, 2.0, 0.95).unwrap();
    assert!(r.lines.iter().all(|l| l.verdict == Verdict::Pass));
}

#[test]
fn corrupted_line_is_isolated() {
    let v = smooth_field(64);
    let eps = [0.32, 0.16, 0.08, 0.04];
    let fam = mollified_family(&v, &eps).unwrap();
    let clean = step2_line_analysis(&v, &eps, &fam, 0.25, 2.5, 0.95).unwrap();
    let mut bad = v.clone();
    let g = *bad.grid();
    bad.values_mut()[g.index(7, 30, 0)] = Complex64::new(f64::NAN, 0.0);
    let r = step2_line_analysis(&bad, &eps, &fam, 0.25, 2.5, 0.95).unwrap();
    assert_eq!(r.failing_lines, vec![30]);
    assert!(r.lines[30].note.is_some());
    for (a, b) in clean.lines.iter().zip(&r.lines) {
        if a.x_index != 30 {
            assert_eq!(a, b);
        }
    }
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn growing_inner_box_never_decreases_localized_norms() {
    let g = Grid::new(1, 64, 64, 2.0 * PI, 2.0 * PI, 1).unwrap();
    let spec = StructureSpec::preset("plaplace-3").unwrap();
    let u0 = initial_field(&g, |x, _| x[0].sin()).unwrap();
    let u = solve(&spec, &u0, &SolveConfig::new(g, g.dt() / 4.0)).unwrap();
    let base = NestedDomains::standard(&g);
    let mut last = [0.0f64; 3];
    for k in 0..=6 {
        // Inner box grows from 1/4 towards 1/2 of the axis.
        let f = 0.25 + 0.24 * k as f64 / 6.0;
        let c = PI;
        let inner = Interval::new(c - f * PI, c + f * PI);
        let nd = NestedDomains {
            time: Nested { inner, ..base.time },
            space: Nested { inner, ..base.space },
        };
        let v = build_cutoff(&g, &nd).unwrap().localize(&u).unwrap();
        let now = [v.lp_norm(2.0), v.lp_norm(3.5), v.time_line(32).sup_norm()];
        for (a, b) in last.iter().zip(&now) {
            assert!(b >= a, "{last:?} -> {now:?}");
        }
        last = now;
    }
}

#[test]
fn config_errors_are_usage_errors() {
    let mut cfg = PipelineConfig::heat(32);
    cfg.structure = Some(StructureConfig {
        p: 2.0,
        eps_reg: 1e-8,
        coefficient: parareg::structure::Coefficient::Unit,
        forcing: None,
    });
    assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))));
    let mut cfg = PipelineConfig::heat(32);
    cfg.ladder_levels = 2;
    assert!(cfg.validate().is_err());
    let mut cfg = PipelineConfig::heat(32);
    cfg.delta_grid = vec![0.1, 0.1];
    assert!(cfg.validate().is_err());
}

#[test]
fn stage_failures_carry_the_stage_name() {
    let mut cfg = PipelineConfig::heat(64);
    cfg.solver.scheme = Scheme::Explicit;
    cfg.solver.substeps = 1;
    match run_pipeline(&cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "solve"),
        other => panic!("expected a solve-stage error, got {other:?}"),
    }
}

#[test]
fn config_parses_from_json() {
    let text = r#"{
        "preset": "heat",
        "grid": {"dim": 1, "n_t": 32, "n_x": 32, "len_t": 6.283185307179586, "len_x": 6.283185307179586},
        "initial": {"kind": "bump", "radius": 0.2, "amplitude": 1.0},
        "eps_list": [0.32, 0.16, 0.08],
        "delta_grid": [0.0, 0.1, 0.2]
    }"#;
    let cfg = PipelineConfig::from_json(text).unwrap();
    assert_eq!(cfg.grid.components, 1);
    assert_eq!(cfg.ladder_levels, 3);
    let r = run_pipeline(&cfg).unwrap();
    assert!(r.exponents.is_some());
}
