//! Mixed-potential interpolation inequality and the analytic family behind it.
//!
//! For `z = a + ib` in the strip `0 <= a <= 1`:
//!
//! * `F(z) = exp((z - theta)^2) J_x^{2z - 1} J_t^{-z} f`
//! * `G(z) = |phi|^{(1 - z) q'/q0' + z q'/q1'} conj(phi)/|phi|` (zero where `phi = 0`),
//!   with `q' = q_theta'`
//! * `H(z) = sum <F(z), G(z)> dV` (bilinear, no conjugation)
//!
//! At `z = theta` the exponent of `|phi|` is one, so `G(theta) = conj(phi)`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{conjugate, q_theta};
use crate::grid::GridFunction;
use crate::potentials::{bessel_symbol, bessel_xt};
use crate::spectral::{forward_transform, inverse_transform, multiply_spectrum, AxisSet, SpectralMultiplier};
use crate::verdict::Verdict;

fn check_params(theta: f64, q0: f64, q1: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::arg(format!("theta must lie in (0, 1), got {theta}")));
    }
    for q in [q0, q1] {
        if !(q > 1.0 && q.is_finite()) {
            return Err(Error::arg(format!("exponents must lie in (1, inf), got {q}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub theta: f64,
    pub q0: f64,
    pub q1: f64,
    pub q_theta: f64,
    /// `||J_x^{2 theta - 1} J_t^{-theta} f||_{q_theta}`
    pub lhs: f64,
    /// `||J_x^{-1} f||_{q0}`
    pub rhs0: f64,
    /// `||J_x J_t^{-1} f||_{q1}`
    pub rhs1: f64,
    pub rhs: f64,
    /// `lhs / rhs`; absent when both sides vanish.
    pub ratio: Option<f64>,
}

/// Both sides of the interpolation inequality for one probe.
pub fn verify_interpolation(f: &GridFunction, theta: f64, q0: f64, q1: f64) -> Result<InterpolationCheck> {
    check_params(theta, q0, q1)?;
    let qt = q_theta(theta, q0, q1);
    let lhs = bessel_xt(f, 2.0 * theta - 1.0, -theta)?.lp_norm(qt);
    let rhs0 = bessel_xt(f, -1.0, 0.0)?.lp_norm(q0);
    let rhs1 = bessel_xt(f, 1.0, -1.0)?.lp_norm(q1);
    let rhs = rhs0.powf(1.0 - theta) * rhs1.powf(theta);
    let ratio = if rhs > 0.0 {
        Some(lhs / rhs)
    } else if lhs == 0.0 {
        None
    } else {
        Some(f64::INFINITY)
    };
    Ok(InterpolationCheck { theta, q0, q1, q_theta: qt, lhs, rhs0, rhs1, rhs, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSuite {
    pub checks: Vec<InterpolationCheck>,
    /// Largest ratio across the suite.
    pub c_suite: f64,
    pub skipped: usize,
    pub verdict: Verdict,
}

/// Runs every probe against every `(theta, q0, q1)` and fits one constant.
pub fn interpolation_suite(probes: &[GridFunction], combos: &[(f64, f64, f64)]) -> Result<InterpolationSuite> {
    let mut checks = Vec::with_capacity(probes.len() * combos.len());
    for f in probes {
        for &(theta, q0, q1) in combos {
            checks.push(verify_interpolation(f, theta, q0, q1)?);
        }
    }
    let ratios: Vec<f64> = checks.iter().filter_map(|c| c.ratio).collect();
    let skipped = checks.len() - ratios.len();
    let c_suite = ratios.iter().cloned().fold(0.0, f64::max);
    let verdict = if ratios.is_empty() {
        Verdict::Skipped
    } else {
        Verdict::from_bool(ratios.iter().all(|r| r.is_finite()))
    };
    Ok(InterpolationSuite { checks, c_suite, skipped, verdict })
}

/// Samples of `H` on a rectangular grid of the strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    pub theta: f64,
    pub a_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    /// `h[i][k] = H(a_grid[i] + i b_grid[k])`
    pub h: Vec<Vec<Complex64>>,
}

fn contains(grid: &[f64], v: f64) -> bool {
    grid.iter().any(|&a| (a - v).abs() <= 1e-14)
}

impl StripSample {
    pub fn new(theta: f64, a_grid: Vec<f64>, b_grid: Vec<f64>, h: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(contains(&a_grid, 0.0) && contains(&a_grid, theta) && contains(&a_grid, 1.0)) {
            return Err(Error::arg("a_grid must contain 0, theta and 1"));
        }
        if a_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::arg("a_grid must lie in [0, 1]"));
        }
        if !contains(&b_grid, 0.0) {
            return Err(Error::arg("b_grid must contain 0"));
        }
        if h.len() != a_grid.len() || h.iter().any(|row| row.len() != b_grid.len()) {
            return Err(Error::arg("H samples do not match the strip grid"));
        }
        if h.iter().flatten().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidField("H samples must be finite".into()));
        }
        Ok(StripSample { theta, a_grid, b_grid, h })
    }

    /// Samples an arbitrary function of `z` on the strip grid.
    pub fn from_fn<F: Fn(Complex64) -> Complex64>(theta: f64, a_grid: Vec<f64>, b_grid: Vec<f64>, h: F) -> Result<Self> {
        let values = a_grid
            .iter()
            .map(|&a| b_grid.iter().map(|&b| h(Complex64::new(a, b))).collect())
            .collect();
        Self::new(theta, a_grid, b_grid, values)
    }

    fn a_index(&self, a: f64) -> usize {
        self.a_grid.iter().position(|&v| (v - a).abs() <= 1e-14).expect("validated at construction")
    }

    /// `sup_b |H(a + ib)|` over the sampled `b`.
    pub fn sup_on_line(&self, a: f64) -> f64 {
        self.h[self.a_index(a)].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `H(theta)`.
    pub fn at_theta(&self) -> Complex64 {
        let k = self.b_grid.iter().position(|&b| b.abs() <= 1e-14).expect("validated");
        self.h[self.a_index(self.theta)][k]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["a", "b", "re_h", "im_h"])?;
        for (i, a) in self.a_grid.iter().enumerate() {
            for (k, b) in self.b_grid.iter().enumerate() {
                let v = self.h[i][k];
                out.write_record(&[a.to_string(), b.to_string(), v.re.to_string(), v.im.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Evenly spaced `b` values on `[-6, 6]` (always including 0).
pub fn default_b_grid(count: usize) -> Vec<f64> {
    let count = count.max(3) | 1;
    (0..count).map(|k| -6.0 + 12.0 * k as f64 / (count - 1) as f64).collect()
}

/// Evenly spaced `a` values on `[0, 1]` with `theta` inserted.
pub fn default_a_grid(theta: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let mut a: Vec<f64> = (0..count).map(|k| k as f64 / (count - 1) as f64).collect();
    if !contains(&a, theta) {
        a.push(theta);
        a.sort_by(f64::total_cmp);
    }
    a
}

/// Normalizes `phi` to unit `L^{r}` norm; errors on a zero field.
pub fn normalize(phi: &GridFunction, r: f64) -> Result<GridFunction> {
    let n = phi.lp_norm(r);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::arg("phi must be a nonzero finite field"));
    }
    Ok(phi.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// Norming functional of `g` in `L^r`: `g |g|^{r-2} / ||g||_r^{r-1}`, which has
/// unit `L^{r'}` norm and pairs with `g` to `||g||_r`.
pub fn dual_element(g: &GridFunction, r: f64) -> Result<GridFunction> {
    let n = g.lp_norm(r);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::arg("dual element of a zero or non-finite field"));
    }
    let comps = g.grid().components();
    let mut out = g.clone();
    for chunk in out.values_mut().chunks_mut(comps) {
        let m = chunk.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let w = if m > 0.0 { m.powf(r - 2.0) / n.powf(r - 1.0) } else { 0.0 };
        for v in chunk.iter_mut() {
            *v *= w;
        }
    }
    Ok(out)
}

/// `H(a + ib)` on the requested grid. `phi` must have unit `L^{q_theta'}` norm.
pub fn sample_h(
    f: &GridFunction,
    phi: &GridFunction,
    theta: f64,
    q0: f64,
    q1: f64,
    a_grid: Vec<f64>,
    b_grid: Vec<f64>,
) -> Result<StripSample> {
    check_params(theta, q0, q1)?;
    if f.grid() != phi.grid() {
        return Err(Error::InvalidField("f and phi live on different grids".into()));
    }
    let qtp = conjugate(q_theta(theta, q0, q1));
    let norm = phi.lp_norm(qtp);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::arg(format!("phi must have unit L^{qtp} norm, has {norm}")));
    }
    let (e0, e1) = (qtp / conjugate(q0), qtp / conjugate(q1));
    let grid = *f.grid();
    let comps = grid.components();
    // Per node: ln|phi| and the unit direction conj(phi)/|phi|.
    let mut log_abs = Vec::with_capacity(grid.nodes());
    let mut dirs = Vec::with_capacity(grid.len());
    for chunk in phi.values().chunks(comps) {
        let m = chunk.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        log_abs.push(if m > 0.0 { Some(m.ln()) } else { None });
        dirs.extend(chunk.iter().map(|v| if m > 0.0 { v.conj() / m } else { Complex64::new(0.0, 0.0) }));
    }
    let f_hat = forward_transform(f);
    let d = grid.dim();
    let dv = grid.cell_volume();
    let mut h = Vec::with_capacity(a_grid.len());
    for &a in &a_grid {
        let mut row = Vec::with_capacity(b_grid.len());
        for &b in &b_grid {
            let z = Complex64::new(a, b);
            let sx = 2.0 * z - 1.0;
            let st = -z;
            let m = SpectralMultiplier::new(AxisSet::SpaceTime, d, usize::MAX, move |w| {
                let sigma: f64 = w[1..].iter().map(|v| v * v).sum();
                bessel_symbol(sx, sigma) * bessel_symbol(st, w[0] * w[0])
            });
            let big_f = inverse_transform(&multiply_spectrum(&f_hat, &m)?);
            let gauss = ((z - theta) * (z - theta)).exp();
            let expo = (1.0 - z) * e0 + z * e1;
            let mut acc = Complex64::new(0.0, 0.0);
            for (node, la) in log_abs.iter().enumerate() {
                if let Some(la) = la {
                    let mag = (expo * la).exp();
                    for c in 0..comps {
                        let p = node * comps + c;
                        acc += big_f.values()[p] * mag * dirs[p];
                    }
                }
            }
            row.push(gauss * acc * dv);
        }
        h.push(row);
    }
    StripSample::new(theta, a_grid, b_grid, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeLinesReport {
    pub theta: f64,
    /// `(a, sup_b |H(a + ib)|)` for every sampled `a`.
    pub line_sups: Vec<(f64, f64)>,
    pub h_theta: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub holds: bool,
    /// Whether `a -> ln M_a` is convex on the sampled `a` (informational).
    pub log_convex: bool,
    pub verdict: Verdict,
}

pub const THREE_LINES_TOL: f64 = 1e-6;

/// `|H(theta)| <= M_0^{1 - theta} M_1^theta (1 + tol)`.
pub fn three_lines_check(ss: &StripSample) -> ThreeLinesReport {
    let line_sups: Vec<(f64, f64)> = ss.a_grid.iter().map(|&a| (a, ss.sup_on_line(a))).collect();
    let m0 = ss.sup_on_line(0.0);
    let m1 = ss.sup_on_line(1.0);
    let bound = m0.powf(1.0 - ss.theta) * m1.powf(ss.theta);
    let h_theta = ss.at_theta().norm();
    let holds = h_theta <= bound * (1.0 + THREE_LINES_TOL);
    let log_convex = line_sups.windows(3).all(|w| {
        let [(a0, m0), (a1, m1), (a2, m2)] = [w[0], w[1], w[2]];
        if m0 <= 0.0 || m1 <= 0.0 || m2 <= 0.0 {
            return true;
        }
        let lam = (a1 - a0) / (a2 - a0);
        m1.ln() <= (1.0 - lam) * m0.ln() + lam * m2.ln() + 1e-12
    });
    let verdict = if bound == 0.0 && h_theta == 0.0 {
        Verdict::Skipped
    } else {
        Verdict::from_bool(holds)
    };
    ThreeLinesReport {
        theta: ss.theta,
        line_sups,
        h_theta,
        bound,
        tolerance: THREE_LINES_TOL,
        holds,
        log_convex,
        verdict,
    }
}

/// Ratios `M_0 / ||J_x^{-1} f||_{q0}` and `M_1 / ||J_x J_t^{-1} f||_{q1}`.
pub fn boundary_constants(ss: &StripSample, f: &GridFunction, q0: f64, q1: f64) -> Result<(f64, f64)> {
    let n0 = bessel_xt(f, -1.0, 0.0)?.lp_norm(q0);
    let n1 = bessel_xt(f, 1.0, -1.0)?.lp_norm(q1);
    Ok((ss.sup_on_line(0.0) / n0, ss.sup_on_line(1.0) / n1))
}
