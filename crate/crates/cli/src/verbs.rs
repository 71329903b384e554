use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use parareg::exponents::q_theta;
use parareg::interpolation::{default_a_grid, default_b_grid, dual_element, interpolation_suite, sample_h, three_lines_check};
use parareg::io::{read_field, write_field};
use parareg::lp_holder::{holder_estimate, uniform_constant, write_line_estimates, DyadicPartition};
use parareg::pipeline::{run_pipeline, GridConfig, PipelineConfig};
use parareg::potentials::{bessel_symbol, bessel_xt, PotentialOrder};
use parareg::probes::{band_limited, bump, gaussian};
use parareg::solver::{energy, spatial_mean};
use parareg::spectral::{mihlin_norm_estimate, MihlinEstimate};
use parareg::{GridFunction, SpectralMultiplier, Verdict};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{read_config, Failure};

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_OUT: &str = "parareg-out";

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    verb: &'a str,
    verdict: Verdict,
    config_hash: String,
    crate_version: &'a str,
    result: T,
}

fn hash_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn out_dir(cli: Option<&Path>, cfg: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = cli.map(Path::to_path_buf).or_else(|| cfg.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| Failure::Internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn finish<T: Serialize>(verb: &str, config: &Path, dir: &Path, verdict: Verdict, summary: String, result: T) -> Result<Verdict, Failure> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        verb,
        verdict,
        config_hash: hash_file(config)?,
        crate_version: env!("CARGO_PKG_VERSION"),
        result,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    fs::write(dir.join("report.json"), text).map_err(|e| Failure::Internal(e.to_string()))?;
    println!("{} {verb}: {summary} -> {}", label(verdict), dir.display());
    Ok(verdict)
}

fn label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Warn => "WARN",
        Verdict::Fail => "FAIL",
        Verdict::Skipped => "SKIPPED",
    }
}

/// Where a verb's input field comes from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSource {
    /// Widths as fractions of the side lengths.
    Gaussian { width_t: f64, width_x: f64 },
    Bump { radius: f64 },
    BandLimited { seed: u64, modes: usize },
    /// Stem of a stored field (`<path>.bin` plus `<path>.json`).
    File { path: PathBuf },
}

fn load_field(grid: Option<GridConfig>, source: &FieldSource) -> Result<GridFunction, Failure> {
    if let FieldSource::File { path } = source {
        return Ok(read_field(path)?);
    }
    let g = grid.ok_or_else(|| Failure::Usage("a generated field needs `grid`".into()))?.build()?;
    Ok(match source {
        FieldSource::Gaussian { width_t, width_x } => gaussian(&g, *width_t, *width_x)?,
        FieldSource::Bump { radius } => bump(&g, *radius)?,
        FieldSource::BandLimited { seed, modes } => band_limited(&g, &g, *seed, *modes)?,
        FieldSource::File { .. } => unreachable!(),
    })
}

#[derive(Serialize)]
struct SolveResult {
    structure: String,
    p: f64,
    max_abs: f64,
    energy_initial: f64,
    energy_final: f64,
    /// Largest change of the spatial integral between stored snapshots.
    mass_drift: Option<f64>,
}

pub fn solve(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let cfg: PipelineConfig = read_config(config)?;
    let spec = cfg.structure_spec()?;
    let g = cfg.grid.build()?;
    let u = cfg.solve_level(&spec, &g, &[g])?;
    let dir = out_dir(out, &cfg.output_dir)?;
    write_field(&dir.join("u"), &u)?;
    let mass_drift = spec.conservative().then(|| {
        (1..g.n_t())
            .flat_map(|it| (0..g.components()).map(move |c| (it, c)))
            .map(|(it, c)| (spatial_mean(&u, it, c) - spatial_mean(&u, it - 1, c)).abs() * g.len_x().powi(g.dim() as i32))
            .fold(0.0, f64::max)
    });
    let max_abs = u.lp_norm(f64::INFINITY);
    let finite = max_abs.is_finite();
    let verdict = Verdict::from_bool(finite && mass_drift.map_or(true, |d| d <= 1e-10));
    let result = SolveResult {
        structure: spec.name.clone(),
        p: spec.p,
        max_abs,
        energy_initial: energy(&u, 0),
        energy_final: energy(&u, g.n_t() - 1),
        mass_drift,
    };
    let summary = format!("{} on {}x{}, max |u| {:.4}", spec.name, g.n_t(), g.n_x(), max_abs);
    finish("solve", config, &dir, verdict, summary, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialConfig {
    #[serde(default)]
    grid: Option<GridConfig>,
    field: FieldSource,
    /// `[re, im]` of the spatial order.
    #[serde(default)]
    space_order: [f64; 2],
    #[serde(default)]
    time_order: [f64; 2],
    #[serde(default = "two")]
    q: f64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn two() -> f64 {
    2.0
}

#[derive(Serialize)]
struct PotentialResult {
    q: f64,
    input_norm: f64,
    output_norm: f64,
    /// Relative L2 error of applying the inverse orders afterwards.
    round_trip_error: f64,
}

pub fn potential(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let cfg: PotentialConfig = read_config(config)?;
    let f = load_field(cfg.grid, &cfg.field)?;
    let order = |v: [f64; 2]| PotentialOrder::new(v[0], v[1]);
    let (sx, st) = (order(cfg.space_order)?, order(cfg.time_order)?);
    let (nx, nt) = (order([-cfg.space_order[0], -cfg.space_order[1]])?, order([-cfg.time_order[0], -cfg.time_order[1]])?);
    let g = bessel_xt(&f, sx, st)?;
    let back = bessel_xt(&g, nx, nt)?;
    let scale = f.l2_norm();
    let round_trip_error = if scale > 0.0 { back.sub(&f)?.l2_norm() / scale } else { back.l2_norm() };
    let dir = out_dir(out, &cfg.output_dir)?;
    write_field(&dir.join("potential"), &g)?;
    let result = PotentialResult { q: cfg.q, input_norm: f.lp_norm(cfg.q), output_norm: g.lp_norm(cfg.q), round_trip_error };
    let verdict = Verdict::from_bool(result.output_norm.is_finite() && round_trip_error <= 1e-10);
    let summary = format!("||f||_q {:.6e} -> {:.6e}, round trip {:.1e}", result.input_norm, result.output_norm, round_trip_error);
    finish("potential", config, &dir, verdict, summary, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HolderConfig {
    #[serde(default)]
    grid: Option<GridConfig>,
    field: FieldSource,
    alpha: f64,
    /// Spatial line indices; all lines when absent.
    #[serde(default)]
    lines: Option<Vec<usize>>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct HolderResult {
    alpha: f64,
    lines: usize,
    c_unif: f64,
    worst_direct: f64,
    worst_lp: f64,
}

pub fn holder(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let cfg: HolderConfig = read_config(config)?;
    let f = load_field(cfg.grid, &cfg.field)?;
    let g = *f.grid();
    let dp = DyadicPartition::for_grid(&g)?;
    let lines = cfg.lines.clone().unwrap_or_else(|| (0..g.spatial_nodes()).collect());
    if let Some(bad) = lines.iter().find(|&&ix| ix >= g.spatial_nodes()) {
        return Err(Failure::Usage(format!("line {bad} is outside the grid")));
    }
    let rows = lines
        .iter()
        .map(|&ix| Ok((ix, holder_estimate(&f.time_line(ix), cfg.alpha, &dp)?)))
        .collect::<Result<Vec<_>, parareg::Error>>()?;
    let dir = out_dir(out, &cfg.output_dir)?;
    let file = fs::File::create(dir.join("lines.csv")).map_err(|e| Failure::Internal(e.to_string()))?;
    write_line_estimates(&rows, file)?;
    let est: Vec<_> = rows.iter().map(|r| r.1).collect();
    let result = HolderResult {
        alpha: cfg.alpha,
        lines: rows.len(),
        c_unif: uniform_constant(&est),
        worst_direct: est.iter().map(|e| e.direct_value).fold(0.0, f64::max),
        worst_lp: est.iter().map(|e| e.lp_value).fold(0.0, f64::max),
    };
    let verdict = Verdict::from_bool(result.c_unif.is_finite() && est.iter().all(|e| e.direct_value.is_finite()));
    let summary = format!("{} lines at alpha {}, C_unif {:.4}", result.lines, cfg.alpha, result.c_unif);
    finish("holder", config, &dir, verdict, summary, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpConfig {
    grid: GridConfig,
    #[serde(default = "ten")]
    probes: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "six")]
    modes: usize,
    /// `[theta, q0, q1]` triples.
    #[serde(default = "default_combos")]
    combos: Vec<[f64; 3]>,
    /// Probes that also get a sampled three-lines check.
    #[serde(default = "two_usize")]
    three_lines_probes: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn ten() -> usize {
    10
}
fn six() -> usize {
    6
}
fn two_usize() -> usize {
    2
}
fn default_combos() -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for theta in [0.25, 0.5, 0.75] {
        for (q0, q1) in [(2.0, 2.0), (3.0, 1.5), (4.0, 4.0 / 3.0), (2.5, 5.0)] {
            out.push([theta, q0, q1]);
        }
    }
    out
}

#[derive(Serialize)]
struct ThreeLinesRow {
    probe: usize,
    theta: f64,
    q0: f64,
    q1: f64,
    h_theta: f64,
    bound: f64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct InterpResult {
    c_suite: f64,
    checks: usize,
    skipped: usize,
    suite_verdict: Verdict,
    three_lines: Vec<ThreeLinesRow>,
}

pub fn interp_check(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let cfg: InterpConfig = read_config(config)?;
    let g = cfg.grid.build()?;
    let probes = (0..cfg.probes as u64)
        .map(|k| band_limited(&g, &g, cfg.seed + k, cfg.modes))
        .collect::<Result<Vec<_>, _>>()?;
    let combos: Vec<(f64, f64, f64)> = cfg.combos.iter().map(|c| (c[0], c[1], c[2])).collect();
    let suite = interpolation_suite(&probes, &combos)?;
    let dir = out_dir(out, &cfg.output_dir)?;
    let mut rows = Vec::new();
    let mut verdict = suite.verdict;
    for (k, f) in probes.iter().take(cfg.three_lines_probes).enumerate() {
        for &(theta, q0, q1) in &combos {
            let qt = q_theta(theta, q0, q1);
            let phi = dual_element(&bessel_xt(f, 2.0 * theta - 1.0, -theta)?, qt)?;
            let ss = sample_h(f, &phi, theta, q0, q1, default_a_grid(theta, 5), default_b_grid(13))?;
            if rows.is_empty() {
                let file = fs::File::create(dir.join("strip.csv")).map_err(|e| Failure::Internal(e.to_string()))?;
                ss.write_csv(file)?;
            }
            let r = three_lines_check(&ss);
            verdict = verdict.and(r.verdict);
            rows.push(ThreeLinesRow { probe: k, theta, q0, q1, h_theta: r.h_theta, bound: r.bound, verdict: r.verdict });
        }
    }
    let result = InterpResult {
        c_suite: suite.c_suite,
        checks: suite.checks.len(),
        skipped: suite.skipped,
        suite_verdict: suite.verdict,
        three_lines: rows,
    };
    let summary = format!("{} checks, C_suite {:.4}, {} three-lines samples", result.checks, result.c_suite, result.three_lines.len());
    finish("interp-check", config, &dir, verdict, summary, result)
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum Symbol {
    /// `(1 + |xi|^2)^{-s/2}` with `s = re + i im`.
    Bessel { re: f64, im: f64 },
    /// `xi_axis / |xi|`.
    Riesz { axis: usize },
    Identity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MihlinConfig {
    dim: usize,
    symbol: Symbol,
    /// Highest derivative order; `dim / 2 + 1` when absent.
    #[serde(default)]
    order_cap: Option<usize>,
    #[serde(default = "samples")]
    samples: usize,
    /// Optional ceiling for the estimate.
    #[serde(default)]
    bound: Option<f64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn samples() -> usize {
    96
}

pub fn mihlin(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let cfg: MihlinConfig = read_config(config)?;
    let d = cfg.dim;
    if d == 0 {
        return Err(Failure::Usage("dim must be positive".into()));
    }
    let m = match cfg.symbol {
        Symbol::Bessel { re, im } => {
            let s = Complex64::new(re, im);
            SpectralMultiplier::radial_spatial(d, move |sigma| bessel_symbol(s, sigma))
        }
        Symbol::Riesz { axis } => {
            if axis >= d {
                return Err(Failure::Usage(format!("axis {axis} needs dim > {axis}")));
            }
            SpectralMultiplier::spatial(d, move |xi| {
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                Complex64::new(xi[axis] / r, 0.0)
            })
        }
        Symbol::Identity => SpectralMultiplier::identity(parareg::AxisSet::Space, d),
    };
    let est: MihlinEstimate = mihlin_norm_estimate(&m, cfg.order_cap.unwrap_or(d / 2 + 1), cfg.samples)?;
    let ok = est.value.is_finite() && cfg.bound.map_or(true, |b| est.value <= b);
    let dir = out_dir(out, &cfg.output_dir)?;
    let summary = format!("estimate {:.6} over orders <= {}", est.value, est.order_cap);
    finish("mihlin", config, &dir, Verdict::from_bool(ok), summary, est)
}

pub fn pipeline(config: &Path, out: Option<&Path>) -> Result<Verdict, Failure> {
    let mut cfg: PipelineConfig = read_config(config)?;
    cfg.output_dir = Some(out_dir(out, &cfg.output_dir)?);
    let report = run_pipeline(&cfg)?;
    let dir = cfg.output_dir.as_ref().unwrap();
    let mut summary = format!("delta {} ", report.measured_delta);
    if let Some(a) = report.alpha_used {
        summary += &format!("alpha {a:.4} ");
    }
    if let Some(s2) = &report.step2 {
        summary += &format!("lines {:.0}% ", 100.0 * s2.pass_fraction);
    }
    let failing: Vec<&str> = report.checks.iter().filter(|(_, v)| v.is_fail()).map(|(k, _)| k.as_str()).collect();
    if !failing.is_empty() {
        summary += &format!("failing: {}", failing.join(", "));
    }
    println!("{} pipeline: {} -> {}", label(report.verdict), summary.trim_end(), dir.display());
    Ok(report.verdict)
}
