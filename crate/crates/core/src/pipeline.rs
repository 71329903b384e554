//! End-to-end regularity run: solve, localize, measure the integrability gain,
//! derive `(alpha, q)` and check Hölder continuity in time, first with values
//! in `L^q` (step 1) and then along individual spatial lines (step 2).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exponents::{q_theta, ExponentSet};
use crate::grid::{Grid, GridFunction};
use crate::interpolation::{
    default_a_grid, default_b_grid, dual_element, sample_h, three_lines_check, verify_interpolation, InterpolationCheck,
    StripSample, ThreeLinesReport,
};
use crate::lp_holder::{bernstein_check, holder_direct, holder_estimate, BernsteinResult, DyadicPartition, HolderEstimate};
use crate::mollify::{apriori_bounds_check, build_cutoff, mollify, stable_tail, AprioriReport, NestedDomains};
use crate::potentials::{bessel_symbol, bessel_t, complex_order_bound_check, ComplexOrderReport};
use crate::solver::{
    caccioppoli_check, higher_integrability_scan, initial_field, solve, CaccioppoliReport, Nonlinear, ScanReport, Scheme,
    SolveConfig,
};
use crate::spectral::apply_line_multiplier;
use crate::structure::{Coefficient, Forcing, StructureSpec};
use crate::verdict::Verdict;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative spread allowed between refinement levels and between scales.
pub const STABILITY_TOL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n_t: usize,
    pub n_x: usize,
    pub len_t: f64,
    pub len_x: f64,
    #[serde(default = "one")]
    pub components: usize,
}

fn one() -> usize {
    1
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n_t, self.n_x, self.len_t, self.len_x, self.components)
    }
}

/// Explicit structure in place of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub p: f64,
    #[serde(default = "default_eps_reg")]
    pub eps_reg: f64,
    #[serde(default = "unit")]
    pub coefficient: Coefficient,
    #[serde(default)]
    pub forcing: Option<Forcing>,
}

fn default_eps_reg() -> f64 {
    crate::structure::DEFAULT_EPS_REG
}

fn unit() -> Coefficient {
    Coefficient::Unit
}

/// Initial data, evaluated on every ladder level from the same formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `amplitude * prod_k sin(2 pi mode x_k / L)`.
    Sine { mode: usize, amplitude: f64 },
    /// Smooth bump of radius `radius * L` centred in the box.
    Bump { radius: f64, amplitude: f64 },
    /// Random trigonometric polynomial with `modes` terms, banded to the coarsest level.
    BandLimited { modes: usize, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Solver steps per stored snapshot.
    #[serde(default = "four")]
    pub substeps: usize,
    #[serde(default = "semi_implicit")]
    pub scheme: Scheme,
    #[serde(default = "newton")]
    pub nonlinear: Nonlinear,
    #[serde(default = "unit_f")]
    pub implicitness: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_max_picard")]
    pub max_picard: usize,
}

fn four() -> usize {
    4
}
fn semi_implicit() -> Scheme {
    Scheme::SemiImplicit
}
fn newton() -> Nonlinear {
    Nonlinear::Newton
}
fn unit_f() -> f64 {
    1.0
}
fn default_picard_tol() -> f64 {
    1e-10
}
fn default_max_picard() -> usize {
    200
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            substeps: 4,
            scheme: Scheme::SemiImplicit,
            nonlinear: Nonlinear::Newton,
            implicitness: 1.0,
            picard_tol: 1e-10,
            max_picard: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub structure: Option<StructureConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub domains: Option<NestedDomains>,
    pub initial: InitialData,
    pub eps_list: Vec<f64>,
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub alpha_override: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_q_hat")]
    pub q_hat: f64,
    #[serde(default = "default_levels")]
    pub ladder_levels: usize,
    #[serde(default = "default_fraction")]
    pub line_pass_fraction: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_q_hat() -> f64 {
    2.0
}
fn default_levels() -> usize {
    3
}
fn default_fraction() -> f64 {
    0.95
}

impl PipelineConfig {
    /// Heat preset at `n x n` (d = 1) on the box `[0, 2 pi]^2`.
    pub fn heat(n: usize) -> Self {
        PipelineConfig {
            preset: Some("heat".into()),
            structure: None,
            grid: GridConfig { dim: 1, n_t: n, n_x: n, len_t: 2.0 * std::f64::consts::PI, len_x: 2.0 * std::f64::consts::PI, components: 1 },
            domains: None,
            initial: InitialData::Sine { mode: 1, amplitude: 1.0 },
            eps_list: vec![0.32, 0.16, 0.08, 0.04, 0.02],
            delta_grid: (0..=14).map(|k| k as f64 * 0.05).collect(),
            alpha_override: None,
            output_dir: None,
            seed: 0,
            q_hat: 2.0,
            ladder_levels: 3,
            line_pass_fraction: 0.95,
            solver: SolverOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn structure_spec(&self) -> Result<StructureSpec> {
        match (&self.preset, &self.structure) {
            (Some(name), None) => StructureSpec::preset(name),
            (None, Some(s)) => StructureSpec::new("custom", s.p, s.eps_reg, s.coefficient.clone(), s.forcing),
            _ => Err(Error::arg("give exactly one of `preset` and `structure`")),
        }
    }

    pub fn domains(&self, grid: &Grid) -> NestedDomains {
        self.domains.unwrap_or_else(|| NestedDomains::standard(grid))
    }

    /// Grids of the refinement ladder, coarsest first; the last is `grid`.
    pub fn ladder(&self) -> Result<Vec<Grid>> {
        let fine = self.grid.build()?;
        (0..self.ladder_levels).rev().map(|k| fine.coarsened(1 << k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.structure_spec()?;
        let grid = self.grid.build()?;
        if self.ladder_levels < 3 {
            return Err(Error::arg("ladder_levels must be at least 3"));
        }
        let ladder = self.ladder()?;
        self.domains(&grid).validate(&grid)?;
        let margin = grid.padding_margin_t().min(grid.padding_margin_x());
        if self.eps_list.len() < 2 || self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::arg("eps_list needs two or more strictly decreasing entries"));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e <= margin)) {
            return Err(Error::arg(format!("every eps must lie in (0, {margin}]")));
        }
        if self.delta_grid.is_empty() || self.delta_grid.windows(2).any(|w| !(w[1] > w[0])) || self.delta_grid[0] < 0.0 {
            return Err(Error::arg("delta_grid must be nonnegative and strictly increasing"));
        }
        if let Some(a) = self.alpha_override {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::arg("alpha_override must lie in (0, 1)"));
            }
        }
        if !(self.line_pass_fraction > 0.0 && self.line_pass_fraction <= 1.0) {
            return Err(Error::arg("line_pass_fraction must lie in (0, 1]"));
        }
        if self.solver.substeps == 0 {
            return Err(Error::arg("solver.substeps must be positive"));
        }
        let p_min = 2.0 * grid.dim() as f64 / (grid.dim() as f64 + 2.0);
        if !(spec.p > p_min) {
            return Err(Error::arg(format!("p must exceed 2d/(d+2) = {p_min}")));
        }
        if !(self.q_hat > 1.0) {
            return Err(Error::arg("q_hat must exceed 1"));
        }
        let _ = ladder;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output location.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output_dir = None;
        let bytes = serde_json::to_vec(&content).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Solves on one level of `ladder`, with the time step set by the finest level.
    pub fn solve_level(&self, spec: &StructureSpec, grid: &Grid, ladder: &[Grid]) -> Result<GridFunction> {
        let fine = ladder.last().ok_or_else(|| Error::arg("empty ladder"))?;
        let u0 = self.initial_on(grid, &ladder[0])?;
        let mut sc = SolveConfig::new(*grid, fine.dt() / self.solver.substeps as f64);
        sc.scheme = self.solver.scheme;
        sc.nonlinear = self.solver.nonlinear;
        sc.implicitness = self.solver.implicitness;
        sc.picard_tol = self.solver.picard_tol;
        sc.max_picard = self.solver.max_picard;
        solve(spec, &u0, &sc)
    }

    fn initial_on(&self, grid: &Grid, coarsest: &Grid) -> Result<GridFunction> {
        let len = grid.len_x();
        match &self.initial {
            InitialData::Zero => Ok(GridFunction::zeros(*grid)),
            InitialData::Sine { mode, amplitude } => initial_field(grid, |x, _| {
                amplitude * x.iter().map(|v| (2.0 * std::f64::consts::PI * *mode as f64 * v / len).sin()).product::<f64>()
            }),
            InitialData::Bump { radius, amplitude } => initial_field(grid, |x, _| {
                let r2: f64 = x.iter().map(|v| ((v - len / 2.0) / (radius * len)).powi(2)).sum();
                amplitude * crate::mollify::bump(r2)
            }),
            InitialData::BandLimited { modes, amplitude } => {
                let f = crate::probes::band_limited(grid, coarsest, self.seed, *modes)?;
                Ok(f.scaled(num_complex::Complex64::new(*amplitude, 0.0)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub crate_name: String,
    pub crate_version: String,
    pub structure: String,
    pub seed: u64,
}

/// `||J_t^{-1/2} v_eps||_{L^q}` per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialBound {
    pub rows: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Level {
    pub n_x: usize,
    /// `sup_t ||v(t)||_{L^q}`
    pub sup_lq: f64,
    /// `sup_{t != s} ||v(t) - v(s)||_{L^q} / |t - s|^alpha`
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1Report {
    pub alpha: f64,
    pub q: f64,
    pub levels: Vec<Step1Level>,
    /// Quotient of `v_eps` on the finest grid, per scale.
    pub eps_quotients: Vec<(f64, f64)>,
    /// `(sup_lq + quotient) / ||J_t^{-1/2} v_eps||_q` at the smallest scale.
    pub constant: Option<f64>,
    /// Finest level: largest quotient per lag `|t - s|`.
    pub lag_series: Vec<(f64, f64)>,
    pub refinement_verdict: Verdict,
    pub eps_verdict: Verdict,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineResult {
    pub x_index: usize,
    /// `||J_t^{-1/2} v_eps(., x)||_{L^q}` per scale.
    pub norms: Vec<f64>,
    pub cauchy: bool,
    /// `sup |v(., x)| + [v(., x)]_alpha`.
    pub lhs: f64,
    /// `lhs / ||J_t^{-1/2} v_eps(., x)||_q` at the smallest scale.
    pub c_line: Option<f64>,
    pub holder: Option<HolderEstimate>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2Report {
    pub alpha: f64,
    pub q: f64,
    pub lines: Vec<LineResult>,
    pub pass_fraction: f64,
    pub required_fraction: f64,
    pub failing_lines: Vec<usize>,
    pub worst_c_line: Option<f64>,
    pub best_c_line: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinSummary {
    pub x_index: usize,
    pub results: Vec<BernsteinResult>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSummary {
    pub check: InterpolationCheck,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub verdict: Verdict,
    pub checks: BTreeMap<String, Verdict>,
    pub messages: Vec<String>,
    pub measured_delta: f64,
    pub exponents: Option<ExponentSet>,
    pub alpha_used: Option<f64>,
    pub scan: Option<ScanReport>,
    pub caccioppoli: Option<CaccioppoliReport>,
    pub apriori: Option<AprioriReport>,
    pub potential_bound: Option<PotentialBound>,
    pub interpolation: Option<InterpolationSummary>,
    pub three_lines: Option<ThreeLinesReport>,
    pub strip: Option<StripSample>,
    pub complex_order: Option<ComplexOrderReport>,
    pub bernstein: Option<BernsteinSummary>,
    pub step1: Option<Step1Report>,
    pub step2: Option<Step2Report>,
}

impl RegularityReport {
    pub fn empty(provenance: Provenance) -> Self {
        RegularityReport {
            schema_version: SCHEMA_VERSION,
            provenance,
            verdict: Verdict::Skipped,
            checks: BTreeMap::new(),
            messages: Vec::new(),
            measured_delta: 0.0,
            exponents: None,
            alpha_used: None,
            scan: None,
            caccioppoli: None,
            apriori: None,
            potential_bound: None,
            interpolation: None,
            three_lines: None,
            strip: None,
            complex_order: None,
            bernstein: None,
            step1: None,
            step2: None,
        }
    }

    fn record(&mut self, name: &str, v: Verdict) {
        self.checks.insert(name.to_string(), v);
        self.verdict = self.verdict.and(v);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RegularityReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::arg(format!("unsupported report schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}

/// `||f||_{L^q}` of one time slice over the spatial box.
fn slice_lq(g: &Grid, slice: &[num_complex::Complex64], q: f64) -> f64 {
    let comps = g.components();
    let s: f64 = slice
        .chunks(comps)
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().powf(q))
        .sum();
    (s * g.spatial_cell_volume()).powf(1.0 / q)
}

/// `sup_t ||v(t)||_q` and the `L^q`-valued Hölder quotient over all time pairs,
/// plus the largest quotient per lag.
pub fn lq_holder_in_time(v: &GridFunction, alpha: f64, q: f64) -> (f64, f64, Vec<(f64, f64)>) {
    let g = *v.grid();
    let nt = g.n_t();
    let sup = (0..nt).map(|it| slice_lq(&g, v.time_slice(it), q)).fold(0.0, f64::max);
    let mut per_lag = vec![0.0f64; nt];
    let mut diff = vec![num_complex::Complex64::new(0.0, 0.0); v.time_slice(0).len()];
    for i in 0..nt {
        for j in (i + 1)..nt {
            for ((d, a), b) in diff.iter_mut().zip(v.time_slice(j)).zip(v.time_slice(i)) {
                *d = a - b;
            }
            let lag = (j - i) as f64 * g.dt();
            let qv = slice_lq(&g, &diff, q) / lag.powf(alpha);
            per_lag[j - i] = per_lag[j - i].max(qv);
        }
    }
    let quotient = per_lag.iter().cloned().fold(0.0, f64::max);
    let series = (1..nt).map(|k| (k as f64 * g.dt(), per_lag[k])).collect();
    (sup, quotient, series)
}

/// `J_t^{-1/2}` of one line, i.e. the half time derivative in Bessel form.
fn half_time_derivative_norm(line: &crate::grid::TimeLine, q: f64) -> Result<f64> {
    let w = apply_line_multiplier(line, |tau| bessel_symbol(num_complex::Complex64::new(-0.5, 0.0), tau * tau))?;
    Ok(w.lp_norm(q))
}

/// Mollified copies of `v`, one per scale.
pub fn mollified_family(v: &GridFunction, eps_list: &[f64]) -> Result<Vec<GridFunction>> {
    eps_list.iter().map(|&e| mollify(v, e)).collect()
}

/// Whether successive differences are non-increasing and the last is under 10%
/// of the first. Sequences that are flat up to rounding pass.
fn cauchy(norms: &[f64]) -> bool {
    if norms.len() < 3 {
        return true;
    }
    let diffs: Vec<f64> = norms.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let slack = 1e-12 * scale;
    let (first, last) = (diffs[0], *diffs.last().unwrap());
    if last <= slack {
        return true;
    }
    diffs.windows(2).all(|w| w[1] <= w[0] + slack) && last < 0.1 * first
}

/// Per-line check: Cauchy behaviour of `||J_t^{-1/2} v_eps(., x)||_q` over
/// the scales of `family` and the line bound `sup + [.]_alpha <= C ||.||_q`.
pub fn step2_line_analysis(
    v: &GridFunction,
    eps_list: &[f64],
    family: &[GridFunction],
    alpha: f64,
    q: f64,
    required_fraction: f64,
) -> Result<Step2Report> {
    if family.len() != eps_list.len() || family.is_empty() {
        return Err(Error::arg("one mollified field per scale is required"));
    }
    let g = *v.grid();
    let dp = DyadicPartition::for_grid(&g)?;
    let lines: Vec<LineResult> = (0..g.spatial_nodes())
        .map(|ix| -> LineResult {
            let line = v.time_line(ix);
            let fail = |note: String| LineResult {
                x_index: ix,
                norms: Vec::new(),
                cauchy: false,
                lhs: 0.0,
                c_line: None,
                holder: None,
                verdict: Verdict::Fail,
                note: Some(note),
            };
            if !line.is_finite() {
                return fail("non-finite samples on the line".into());
            }
            let norms: Result<Vec<f64>> = family.iter().map(|f| half_time_derivative_norm(&f.time_line(ix), q)).collect();
            let norms = match norms {
                Ok(n) if n.iter().all(|x| x.is_finite()) => n,
                Ok(_) => return fail("non-finite potential norm".into()),
                Err(e) => return fail(e.to_string()),
            };
            let (sup, holder) = match holder_estimate(&line, alpha, &dp) {
                Ok(h) => (line.sup_norm(), h),
                Err(e) => return fail(e.to_string()),
            };
            let lhs = sup + holder.direct_value;
            let rhs = *norms.last().unwrap();
            let c_line = if rhs > 0.0 {
                Some(lhs / rhs)
            } else if lhs == 0.0 {
                None
            } else {
                return fail("positive left side against a vanishing potential norm".into());
            };
            let ok = cauchy(&norms) && lhs.is_finite();
            LineResult {
                x_index: ix,
                cauchy: cauchy(&norms),
                norms,
                lhs,
                c_line,
                holder: Some(holder),
                verdict: Verdict::from_bool(ok),
                note: None,
            }
        })
        .collect();
    let passing = lines.iter().filter(|l| l.verdict == Verdict::Pass).count();
    let pass_fraction = passing as f64 / lines.len() as f64;
    let failing_lines = lines.iter().filter(|l| l.verdict != Verdict::Pass).map(|l| l.x_index).collect();
    let cs: Vec<f64> = lines.iter().filter(|l| l.verdict == Verdict::Pass).filter_map(|l| l.c_line).collect();
    let worst_c_line = cs.iter().cloned().reduce(f64::max);
    let best_c_line = cs.iter().cloned().reduce(f64::min);
    Ok(Step2Report {
        alpha,
        q,
        lines,
        pass_fraction,
        required_fraction,
        failing_lines,
        worst_c_line,
        best_c_line,
        verdict: Verdict::from_bool(pass_fraction >= required_fraction),
    })
}

fn within(values: &[f64], tol: f64) -> bool {
    match values.last() {
        Some(&last) if values.iter().all(|v| v.is_finite()) => {
            values.iter().all(|v| (v - last).abs() <= tol * last.abs() || (v - last).abs() <= 1e-12)
        }
        _ => false,
    }
}

/// Runs every stage; writes the report and plot series when `output_dir` is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RegularityReport> {
    cfg.validate()?;
    let spec = cfg.structure_spec()?;
    let provenance = Provenance {
        config_hash: cfg.hash(),
        crate_name: env!("CARGO_PKG_NAME").into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        structure: spec.name.clone(),
        seed: cfg.seed,
    };
    let mut report = RegularityReport::empty(provenance);
    let grids = cfg.ladder()?;
    let fine = *grids.last().unwrap();
    let nd = cfg.domains(&fine);
    if fine.dim() < 2 {
        report.messages.push("d = 1 lies below the dimension range d >= 2 of the time-regularity estimate".into());
    }

    let ladder: Vec<GridFunction> = grids
        .iter()
        .map(|g| cfg.solve_level(&spec, g, &grids))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("solve"))?;
    let u = ladder.last().unwrap();

    let cacc = caccioppoli_check(&ladder, spec.p, &nd).map_err(|e| e.in_stage("caccioppoli"))?;
    report.record("caccioppoli", cacc.verdict);
    report.caccioppoli = Some(cacc);

    let scan = higher_integrability_scan(&ladder, spec.p, &nd, &cfg.delta_grid).map_err(|e| e.in_stage("scan"))?;
    report.measured_delta = scan.measured_delta;
    if let Some(w) = &scan.warning {
        report.messages.push(w.clone());
    }
    report.scan = Some(scan);

    let exps = match ExponentSet::new(spec.p, report.measured_delta, cfg.q_hat, fine.dim()) {
        Ok(e) => e,
        Err(Error::DegenerateExponent) => {
            report.messages.push("measured delta = 0 gives alpha = 0: no Hölder exponent to test".into());
            report.record("exponents", Verdict::Fail);
            finish(cfg, &report)?;
            return Ok(report);
        }
        Err(e) => return Err(e.in_stage("exponents")),
    };
    report.exponents = Some(exps);
    report.record("exponents", Verdict::Pass);
    let alpha = cfg.alpha_override.unwrap_or(exps.alpha);
    report.alpha_used = Some(alpha);
    let q = exps.q;

    let cutoffs: Vec<_> = grids.iter().map(|g| build_cutoff(g, &nd)).collect::<Result<_>>().map_err(|e| e.in_stage("localize"))?;
    let vs: Vec<GridFunction> = cutoffs
        .iter()
        .zip(&ladder)
        .map(|(c, u)| c.localize(u))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("localize"))?;
    let v = vs.last().unwrap();
    let chi = cutoffs.last().unwrap();

    let apriori = apriori_bounds_check(u, chi, &cfg.eps_list, &exps).map_err(|e| e.in_stage("apriori"))?;
    report.record("apriori", apriori.verdict);
    report.apriori = Some(apriori);

    let family = mollified_family(v, &cfg.eps_list).map_err(|e| e.in_stage("mollify"))?;
    let v_eps = family.last().unwrap();

    let rows: Vec<(f64, f64)> = cfg
        .eps_list
        .iter()
        .zip(&family)
        .map(|(&e, f)| Ok((e, bessel_t(f, -0.5)?.lp_norm(q))))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("potential"))?;
    let norms: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let pv = Verdict::from_bool(norms.iter().all(|n| n.is_finite()) && stable_tail(&norms));
    report.record("potential_bound", pv);
    report.potential_bound = Some(PotentialBound { rows, verdict: pv });

    let (q0, q1) = (exps.q0(), exps.q1());
    let check = verify_interpolation(v_eps, 0.5, q0, q1).map_err(|e| e.in_stage("interpolation"))?;
    let iv = match check.ratio {
        None => Verdict::Skipped,
        Some(r) => Verdict::from_bool(r.is_finite()),
    };
    report.record("interpolation", iv);
    report.interpolation = Some(InterpolationSummary { check, verdict: iv });

    if v_eps.l2_norm() > 0.0 {
        // Norming functional of F(1/2) = J_t^{-1/2} v_eps, so that H(1/2) = ||F(1/2)||.
        let qt = q_theta(0.5, q0, q1);
        let phi = bessel_t(v_eps, -0.5)
            .and_then(|f| dual_element(&f, qt))
            .map_err(|e| e.in_stage("three-lines"))?;
        let strip = sample_h(v_eps, &phi, 0.5, q0, q1, default_a_grid(0.5, 5), default_b_grid(13))
            .map_err(|e| e.in_stage("three-lines"))?;
        let tl = three_lines_check(&strip);
        report.record("three_lines", tl.verdict);
        report.three_lines = Some(tl);
        report.strip = Some(strip);

        let co = complex_order_bound_check(&[0.0, 0.5, 1.0, 2.0], &[0.0, 2.0, 8.0, 16.0], std::slice::from_ref(v_eps), q)
            .map_err(|e| e.in_stage("complex-order"))?;
        report.complex_order = Some(co);
    } else {
        report.record("three_lines", Verdict::Skipped);
    }

    // Bernstein on the line through the centre of the box.
    let centre = fine.spatial_flat_index(&vec![fine.n_x() / 2; fine.dim()]);
    let dp = DyadicPartition::for_grid(&fine).map_err(|e| e.in_stage("bernstein"))?;
    let line = v_eps.time_line(centre);
    let results: Vec<BernsteinResult> =
        dp.blocks().map(|j| bernstein_check(&line, j, q, &dp)).collect::<Result<_>>().map_err(|e| e.in_stage("bernstein"))?;
    let bv = results.iter().fold(Verdict::Skipped, |acc, r| acc.and(r.verdict));
    report.record("bernstein", bv);
    report.bernstein = Some(BernsteinSummary { x_index: centre, results, verdict: bv });

    // Step 1: L^q-valued Hölder continuity, across the ladder and the scales.
    let mut levels = Vec::new();
    let mut lag_series = Vec::new();
    for vk in &vs {
        let (sup_lq, quotient, series) = lq_holder_in_time(vk, alpha, q);
        levels.push(Step1Level { n_x: vk.grid().n_x(), sup_lq, quotient });
        lag_series = series;
    }
    let eps_quotients: Vec<(f64, f64)> =
        cfg.eps_list.iter().zip(&family).map(|(&e, f)| (e, lq_holder_in_time(f, alpha, q).1)).collect();
    let quotients: Vec<f64> = levels.iter().map(|l| l.quotient).collect();
    let rv = Verdict::from_bool(within(&quotients, STABILITY_TOL));
    let eq: Vec<f64> = eps_quotients.iter().map(|e| e.1).collect();
    let ev = Verdict::from_bool(within(&eq, STABILITY_TOL));
    let last = levels.last().unwrap();
    let bound = norms.last().copied().unwrap_or(0.0);
    let constant = (bound > 0.0).then(|| (last.sup_lq + last.quotient) / bound);
    let s1v = rv.and(ev);
    report.record("step1", s1v);
    report.step1 = Some(Step1Report {
        alpha,
        q,
        levels,
        eps_quotients,
        constant,
        lag_series,
        refinement_verdict: rv,
        eps_verdict: ev,
        verdict: s1v,
    });

    let step2 = step2_line_analysis(v, &cfg.eps_list, &family, alpha, q, cfg.line_pass_fraction)
        .map_err(|e| e.in_stage("step2"))?;
    report.record("step2", step2.verdict);
    report.step2 = Some(step2);

    finish(cfg, &report)?;
    Ok(report)
}

fn finish(cfg: &PipelineConfig, report: &RegularityReport) -> Result<()> {
    if let Some(dir) = &cfg.output_dir {
        write_report(report, dir)?;
    }
    Ok(())
}

/// `report.json` plus the plot series in `dir`.
pub fn write_report(report: &RegularityReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    emit_plots(report, &dir.join("series"))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub files: Vec<SeriesFile>,
}

struct Table {
    name: &'static str,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn tables(report: &RegularityReport) -> Vec<Table> {
    let mut out = Vec::new();
    if let Some(a) = &report.apriori {
        out.push(Table {
            name: "apriori_norms.csv",
            columns: vec!["eps", "space_norm", "time_norm"],
            rows: a.rows.iter().map(|r| vec![r.eps.to_string(), r.space_norm.to_string(), r.time_norm.to_string()]).collect(),
        });
    }
    if let Some(c) = &report.complex_order {
        out.push(Table {
            name: "complex_order_surface.csv",
            columns: vec!["a", "b", "ratio", "bound"],
            rows: c.rows.iter().map(|r| vec![r.a.to_string(), r.b.to_string(), r.ratio.to_string(), r.bound.to_string()]).collect(),
        });
    }
    if let Some(s) = &report.strip {
        let mut rows = Vec::new();
        for (i, a) in s.a_grid.iter().enumerate() {
            for (k, b) in s.b_grid.iter().enumerate() {
                let h = s.h[i][k];
                rows.push(vec![a.to_string(), b.to_string(), h.norm().to_string(), h.re.to_string(), h.im.to_string()]);
            }
        }
        out.push(Table { name: "three_lines_profile.csv", columns: vec!["a", "b", "abs_h", "re_h", "im_h"], rows });
    }
    if let Some(s2) = &report.step2 {
        let vals: Vec<f64> = s2.lines.iter().filter_map(|l| l.c_line).filter(|c| c.is_finite()).collect();
        out.push(Table { name: "line_holder_histogram.csv", columns: vec!["bin_lo", "bin_hi", "count"], rows: histogram(&vals, 20) });
    }
    if let Some(s1) = &report.step1 {
        out.push(Table {
            name: "step1_quotient.csv",
            columns: vec!["lag", "quotient"],
            rows: s1.lag_series.iter().map(|(l, q)| vec![l.to_string(), q.to_string()]).collect(),
        });
    }
    out
}

fn histogram(vals: &[f64], bins: usize) -> Vec<Vec<String>> {
    if vals.is_empty() {
        return Vec::new();
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in vals {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![(lo + k as f64 * width).to_string(), (lo + (k + 1) as f64 * width).to_string(), c.to_string()])
        .collect()
}

/// Writes one CSV per available series and `manifest.json` into `dir`.
pub fn emit_plots(report: &RegularityReport, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for t in tables(report) {
        let mut w = csv::Writer::from_path(dir.join(t.name))?;
        w.write_record(&t.columns)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        files.push(SeriesFile { name: t.name.into(), columns: t.columns.iter().map(|c| c.to_string()).collect(), rows: t.rows.len() });
    }
    let manifest = Manifest { schema_version: SCHEMA_VERSION, files };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Checks that every file in the manifest exists with the declared header and row count.
pub fn validate_series(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    for f in &manifest.files {
        let mut r = csv::Reader::from_path(dir.join(&f.name))?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != f.columns {
            return Err(Error::InvalidField(format!("{}: header {:?} does not match manifest", f.name, header)));
        }
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.iter().any(|c| c.parse::<f64>().is_err()) {
                return Err(Error::InvalidField(format!("{}: non-numeric cell in row {rows}", f.name)));
            }
            rows += 1;
        }
        if rows != f.rows {
            return Err(Error::InvalidField(format!("{}: {rows} rows, manifest says {}", f.name, f.rows)));
        }
    }
    Ok(manifest)
}

/// Single-line Hölder check used by the CLI.
pub fn line_holder(line: &crate::grid::TimeLine, alpha: f64) -> Result<(f64, f64)> {
    let dp = DyadicPartition::new(line.period(), line.len())?;
    let d = holder_direct(line, alpha)?;
    let lp = crate::lp_holder::holder_lp(line, alpha, &dp)?;
    Ok((d.value, lp))
}
