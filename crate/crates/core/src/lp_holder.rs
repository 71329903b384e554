//! Littlewood-Paley blocks in the time frequency and Hölder-in-time estimates.
//!
//! `psi(tau) = eta(tau) - eta(2 tau)` where `eta = 1` on `[0, 2]`, `eta = 0` on
//! `[4, inf)` with a `C^inf` step in between; `psi` is supported in `[1, 4]`
//! and `psi_j(tau) = psi(2^{-j} |tau|)`. A finite sum telescopes:
//! `sum_{j=a}^{b} psi_j = eta(2^{-b} tau) - eta(2^{1-a} tau)`, which equals one
//! exactly on `2^{a+1} <= |tau| <= 2^{b+1}`.

use std::io::Write;

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Direction};
use crate::grid::{angular_frequency, Grid, GridFunction, TimeLine};
use crate::kernel::kernel_lq_norm;
use crate::mollify::smoothstep;
use crate::potentials::bessel_symbol;
use crate::spectral::{apply_line_multiplier, apply_multiplier, SpectralMultiplier};

pub fn eta(tau: f64) -> f64 {
    1.0 - smoothstep((tau.abs() - 2.0) / 2.0)
}

pub fn psi(tau: f64) -> f64 {
    eta(tau) - eta(2.0 * tau)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicPartition {
    pub j_min: i32,
    pub j_max: i32,
    pub len_t: f64,
    pub n_t: usize,
}

impl DyadicPartition {
    /// Blocks from the lowest nonzero frequency `2 pi / L` up to Nyquist `pi n / L`.
    pub fn new(len_t: f64, n_t: usize) -> Result<Self> {
        if !(len_t > 0.0) || n_t < 4 {
            return Err(Error::arg("partition needs a positive period and at least 4 samples"));
        }
        let lowest = 2.0 * std::f64::consts::PI / len_t;
        let nyquist = std::f64::consts::PI * n_t as f64 / len_t;
        let j_min = lowest.log2().floor() as i32;
        let j_max = (nyquist.log2().ceil() as i32 - 1).max(j_min);
        Ok(DyadicPartition { j_min, j_max, len_t, n_t })
    }

    pub fn for_grid(grid: &Grid) -> Result<Self> {
        Self::new(grid.len_t(), grid.n_t())
    }

    pub fn psi_j(j: i32, tau: f64) -> f64 {
        psi(tau.abs() * 2f64.powi(-j))
    }

    /// `1 - sum_{j in range} psi_j`: the part left to the remainder.
    pub fn remainder_symbol(&self, tau: f64) -> f64 {
        1.0 - (self.j_min..=self.j_max).map(|j| Self::psi_j(j, tau)).sum::<f64>()
    }

    /// Band on which the blocks alone sum to one.
    pub fn unity_band(&self) -> (f64, f64) {
        (2f64.powi(self.j_min + 1), 2f64.powi(self.j_max + 1))
    }

    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    fn check_line(&self, line: &TimeLine) -> Result<()> {
        if line.len() != self.n_t || (line.period() - self.len_t).abs() > 1e-12 * self.len_t {
            return Err(Error::arg("time line does not match the partition's grid"));
        }
        Ok(())
    }
}

/// `F_t^{-1}(psi_j F_t f)` on one line.
pub fn lp_block(line: &TimeLine, j: i32, dp: &DyadicPartition) -> Result<TimeLine> {
    dp.check_line(line)?;
    apply_line_multiplier(line, |w| c(DyadicPartition::psi_j(j, w)))
}

/// Low-frequency remainder `F_t^{-1}((1 - sum psi_j) F_t f)`.
pub fn low_remainder(line: &TimeLine, dp: &DyadicPartition) -> Result<TimeLine> {
    dp.check_line(line)?;
    apply_line_multiplier(line, |w| c(dp.remainder_symbol(w)))
}

/// Block `j` of a whole field, along the time axis.
pub fn lp_block_field(f: &GridFunction, j: i32) -> Result<GridFunction> {
    apply_multiplier(f, &SpectralMultiplier::temporal(move |w| c(DyadicPartition::psi_j(j, w))))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Littlewood-Paley Hölder estimate:
/// `sup_j 2^{j alpha} max|block_j| + Lip(remainder) * L^{1 - alpha}`.
pub fn holder_lp(line: &TimeLine, alpha: f64, dp: &DyadicPartition) -> Result<f64> {
    check_alpha(alpha)?;
    let mut best = 0.0f64;
    for j in dp.blocks() {
        let b = lp_block(line, j, dp)?;
        best = nan_max(best, 2f64.powf(j as f64 * alpha) * b.sup_norm());
    }
    let r = low_remainder(line, dp)?;
    let lip = (0..r.len())
        .map(|i| r.dist(i, (i + 1) % r.len()) / r.dt)
        .fold(0.0, nan_max);
    Ok(best + lip * dp.len_t.powf(1.0 - alpha))
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectHolder {
    pub value: f64,
    pub pairs: usize,
}

/// Exact `max_{s < t} |f(t) - f(s)| / |t - s|^alpha` over grid pairs, measured
/// along the line (no periodic wrap). NaN samples make the result NaN.
pub fn holder_direct(line: &TimeLine, alpha: f64) -> Result<DirectHolder> {
    check_alpha(alpha)?;
    let n = line.len();
    let stripe = |i: usize| -> f64 {
        ((i + 1)..n)
            .map(|j| line.dist(i, j) / ((j - i) as f64 * line.dt).powf(alpha))
            .fold(0.0, nan_max)
    };
    #[cfg(feature = "parallel")]
    let value = (0..n).into_par_iter().map(stripe).reduce(|| 0.0, nan_max);
    #[cfg(not(feature = "parallel"))]
    let value = (0..n).map(stripe).fold(0.0, nan_max);
    Ok(DirectHolder { value, pairs: n * (n - 1) / 2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub alpha: f64,
    pub lp_value: f64,
    pub direct_value: f64,
    pub pairs_examined: usize,
}

pub fn holder_estimate(line: &TimeLine, alpha: f64, dp: &DyadicPartition) -> Result<HolderEstimate> {
    let d = holder_direct(line, alpha)?;
    Ok(HolderEstimate {
        alpha,
        lp_value: holder_lp(line, alpha, dp)?,
        direct_value: d.value,
        pairs_examined: d.pairs,
    })
}

/// Smallest `C` with `direct <= C * lp` over a suite; estimates with
/// `lp = 0` must also have `direct = 0` or the suite has no finite constant.
pub fn uniform_constant(estimates: &[HolderEstimate]) -> f64 {
    estimates.iter().fold(0.0, |c, e| {
        if e.lp_value > 0.0 {
            nan_max(c, e.direct_value / e.lp_value)
        } else if e.direct_value > 0.0 {
            f64::INFINITY
        } else {
            c
        }
    })
}

/// Per-line estimates as CSV rows `(x_index, lp_value, direct_value)`.
pub fn write_line_estimates<W: Write>(rows: &[(usize, HolderEstimate)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x_index", "lp_value", "direct_value"])?;
    for (ix, e) in rows {
        out.write_record(&[ix.to_string(), e.lp_value.to_string(), e.direct_value.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Symbol equal to one on the support of `psi_j`.
fn block_envelope(j: i32, tau: f64) -> f64 {
    let t = tau.abs() * 2f64.powi(-j);
    eta(t / 2.0) - eta(4.0 * t)
}

/// `||K_j||_{L^{q'}} / 2^{j/q}` for the periodic kernel `K_j` that reproduces
/// every function with spectrum in `supp psi_j`. Hölder's inequality then
/// gives `||b||_inf <= bound * 2^{j/q} ||b||_q` for such `b` on this grid.
pub fn bernstein_kernel_bound(dp: &DyadicPartition, j: i32, q: f64) -> f64 {
    let n = dp.n_t;
    let dt = dp.len_t / n as f64;
    let mut k: Vec<Complex64> = (0..n)
        .map(|l| c(block_envelope(j, angular_frequency(l, n, dp.len_t))))
        .collect();
    fft::transform_line(&mut k, 1, Direction::Inverse);
    // Unitary inverse -> kernel with b = sum_m K[m] b[k - m] dt.
    let scale = 1.0 / ((n as f64).sqrt() * dt);
    let qp = q / (q - 1.0);
    let norm = k
        .iter()
        .map(|v| (v.norm() * scale).powf(qp) * dt)
        .sum::<f64>()
        .powf(1.0 / qp);
    norm / 2f64.powf(j as f64 / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinResult {
    pub j: i32,
    pub q: f64,
    /// `||b||_inf / (2^{j/q} ||b||_q)`, absent for a zero block.
    pub ratio: Option<f64>,
    pub kernel_bound: f64,
    pub verdict: crate::verdict::Verdict,
}

/// Bernstein ratio of block `j` of `line` against the grid's kernel bound.
pub fn bernstein_check(line: &TimeLine, j: i32, q: f64, dp: &DyadicPartition) -> Result<BernsteinResult> {
    use crate::verdict::Verdict;
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::arg(format!("q must lie in [1, inf), got {q}")));
    }
    let b = lp_block(line, j, dp)?;
    let bound = bernstein_kernel_bound(dp, j, q);
    let sup = b.sup_norm();
    let lq = b.lp_norm(q);
    // Relative to the input: a block at roundoff level counts as zero.
    if lq <= 1e-13 * line.lp_norm(q).max(f64::MIN_POSITIVE) || lq == 0.0 {
        return Ok(BernsteinResult { j, q, ratio: None, kernel_bound: bound, verdict: Verdict::Skipped });
    }
    let ratio = sup / (2f64.powf(j as f64 / q) * lq);
    Ok(BernsteinResult {
        j,
        q,
        ratio: Some(ratio),
        kernel_bound: bound,
        verdict: Verdict::from_bool(ratio.is_finite() && ratio <= bound * (1.0 + 1e-9)),
    })
}

/// `||G_t^{1/2}||_{L^{q'}(R)}`, computed once and reused on many lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupBoundKernel {
    pub q: f64,
    pub kernel_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupBound {
    pub sup: f64,
    pub bound: f64,
    pub holds: bool,
}

impl SupBoundKernel {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 2.0 && q.is_finite()) {
            return Err(Error::arg(format!("the half-order kernel needs q > 2, got {q}")));
        }
        Ok(SupBoundKernel { q, kernel_norm: kernel_lq_norm(0.5, 1, q / (q - 1.0))? })
    }

    /// `max|f|` against `||G^{1/2}||_{q'} ||J_t^{-1/2} f||_q`.
    pub fn check(&self, line: &TimeLine) -> Result<SupBound> {
        let g = apply_line_multiplier(line, |w| bessel_symbol(c(-0.5), w * w))?;
        let bound = self.kernel_norm * g.lp_norm(self.q);
        let sup = line.sup_norm();
        Ok(SupBound { sup, bound, holds: sup <= bound * (1.0 + 1e-12) })
    }
}

pub fn sup_bound_via_kernel(line: &TimeLine, q: f64) -> Result<SupBound> {
    SupBoundKernel::new(q)?.check(line)
}
