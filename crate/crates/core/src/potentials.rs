//! Bessel potentials `J^s` of complex order via their Fourier symbols.
//!
//! `J^s f = F^{-1}((1 + |xi|^2)^{-s/2} F f)` with the principal branch:
//! the base `1 + |xi|^2` is real and positive, so the power is
//! `exp(-(s/2) ln(1 + |xi|^2))`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::spectral::{apply_multiplier, AxisSet, SpectralMultiplier};

/// Complex order `s` of a Bessel potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialOrder {
    pub re: f64,
    pub im: f64,
}

impl PotentialOrder {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::arg(format!("potential order {re}+{im}i is not finite")));
        }
        Ok(PotentialOrder { re, im })
    }

    pub fn real(s: f64) -> Result<Self> {
        Self::new(s, 0.0)
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<f64> for PotentialOrder {
    fn from(s: f64) -> Self {
        PotentialOrder { re: s, im: 0.0 }
    }
}

/// Interpolation parameter `theta` of the mixed potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedOrder {
    theta: f64,
}

impl MixedOrder {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::arg(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(MixedOrder { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn space_order(&self) -> f64 {
        2.0 * self.theta - 1.0
    }

    pub fn time_order(&self) -> f64 {
        -self.theta
    }
}

/// `(1 + sigma)^{-s/2}` for `sigma = |xi|^2 >= 0`.
pub fn bessel_symbol(s: Complex64, sigma: f64) -> Complex64 {
    (-(s / 2.0) * (1.0 + sigma).ln()).exp()
}

/// Symbol of `J_x^{s}` on `d` spatial axes.
pub fn space_multiplier(d: usize, s: PotentialOrder) -> SpectralMultiplier {
    let s = s.value();
    SpectralMultiplier::radial_spatial(d, move |sigma| bessel_symbol(s, sigma))
}

/// Symbol of `J_t^{s}`.
pub fn time_multiplier(s: PotentialOrder) -> SpectralMultiplier {
    let s = s.value();
    SpectralMultiplier::temporal(move |tau| bessel_symbol(s, tau * tau))
}

/// Symbol of `J_x^{sx} J_t^{st}` as one multiplier.
pub fn space_time_multiplier(d: usize, sx: PotentialOrder, st: PotentialOrder) -> SpectralMultiplier {
    let (sx, st) = (sx.value(), st.value());
    SpectralMultiplier::new(AxisSet::SpaceTime, d, usize::MAX, move |w| {
        let sigma: f64 = w[1..].iter().map(|v| v * v).sum();
        bessel_symbol(sx, sigma) * bessel_symbol(st, w[0] * w[0])
    })
}

pub fn bessel_x(f: &GridFunction, s: impl Into<PotentialOrder>) -> Result<GridFunction> {
    apply_multiplier(f, &space_multiplier(f.grid().dim(), s.into()))
}

pub fn bessel_t(f: &GridFunction, s: impl Into<PotentialOrder>) -> Result<GridFunction> {
    apply_multiplier(f, &time_multiplier(s.into()))
}

/// `J_x^{sx} J_t^{st} f` in a single transform pass.
pub fn bessel_xt(
    f: &GridFunction,
    sx: impl Into<PotentialOrder>,
    st: impl Into<PotentialOrder>,
) -> Result<GridFunction> {
    apply_multiplier(f, &space_time_multiplier(f.grid().dim(), sx.into(), st.into()))
}

/// `J_x^{2 theta - 1} J_t^{-theta} f`.
pub fn mixed_potential(f: &GridFunction, theta: MixedOrder) -> Result<GridFunction> {
    if theta.space_order() == 0.0 {
        return bessel_t(f, theta.time_order());
    }
    bessel_xt(f, theta.space_order(), theta.time_order())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexOrderRow {
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexOrderReport {
    pub q: f64,
    pub dim: usize,
    pub rows: Vec<ComplexOrderRow>,
    pub fitted_c: f64,
    pub worst_ratio: f64,
    /// Least-squares slope of `ln ratio` against `ln(1 + a + |b|)`.
    pub growth_exponent: Option<f64>,
}

impl ComplexOrderReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// For every `(a, b)`, the largest `||J_x^{2a + 2ib} phi||_q / ||phi||_q` over
/// the probes, together with the smallest `C` such that every ratio is at most
/// `C (1 + a + |b|)^{d + 2}`.
pub fn complex_order_bound_check(
    a_values: &[f64],
    b_values: &[f64],
    probes: &[GridFunction],
    q: f64,
) -> Result<ComplexOrderReport> {
    if probes.is_empty() {
        return Err(Error::arg("complex-order check needs at least one probe"));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::arg(format!("q must lie in (1, inf), got {q}")));
    }
    if let Some(a) = a_values.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::arg(format!("a must be nonnegative, got {a}")));
    }
    let dim = probes[0].grid().dim();
    let norms: Vec<f64> = probes.iter().map(|p| p.lp_norm(q)).collect();
    if norms.iter().any(|n| !(*n > 0.0)) {
        return Err(Error::arg("probes must be nonzero"));
    }
    let mut rows = Vec::with_capacity(a_values.len() * b_values.len());
    for &a in a_values {
        for &b in b_values {
            let s = PotentialOrder::new(2.0 * a, 2.0 * b)?;
            let mut ratio = 0.0f64;
            for (p, n) in probes.iter().zip(&norms) {
                ratio = ratio.max(bessel_x(p, s)?.lp_norm(q) / n);
            }
            rows.push(ComplexOrderRow { a, b, ratio, bound: 0.0 });
        }
    }
    let growth = |r: &ComplexOrderRow| (1.0 + r.a + r.b.abs()).powi(dim as i32 + 2);
    let fitted_c = rows.iter().map(|r| r.ratio / growth(r)).fold(0.0, f64::max);
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    for r in rows.iter_mut() {
        r.bound = fitted_c * growth(r);
    }
    Ok(ComplexOrderReport {
        q,
        dim,
        growth_exponent: log_slope(&rows),
        rows,
        fitted_c,
        worst_ratio,
    })
}

fn log_slope(rows: &[ComplexOrderRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ratio > 0.0)
        .map(|r| ((1.0 + r.a + r.b.abs()).ln(), r.ratio.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx <= 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn probe() -> GridFunction {
        let g = Grid::new(1, 16, 32, 2.0 * PI, 2.0 * PI, 1).unwrap();
        GridFunction::from_real_fn(g, |t, x, _| (x[0]).sin() * (2.0 * t).cos() + 0.3).unwrap()
    }

    #[test]
    fn order_zero_is_identity() {
        let f = probe();
        let out = bessel_x(&f, 0.0).unwrap();
        assert!(out.sub(&f).unwrap().l2_norm() < 1e-14);
        let out = bessel_t(&f, 0.0).unwrap();
        assert!(out.sub(&f).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn plane_wave_in_time() {
        let g = Grid::new(1, 32, 8, 3.0, 1.0, 1).unwrap();
        let f = GridFunction::from_fn(g, |t, _, _| Complex64::from_polar(1.0, 2.0 * PI * 2.0 * t / 3.0))
            .unwrap();
        let s = 0.7;
        let out = bessel_t(&f, s).unwrap();
        let factor = (1.0 + (4.0 * PI / 3.0f64).powi(2)).powf(-s / 2.0);
        let diff = out.sub(&f.scaled(Complex64::new(factor, 0.0))).unwrap();
        assert!(diff.l2_norm() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn mixed_half_is_time_only() {
        let f = probe();
        let a = mixed_potential(&f, MixedOrder::new(0.5).unwrap()).unwrap();
        let b = bessel_t(&f, -0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_row_has_unit_ratio() {
        let r = complex_order_bound_check(&[0.0], &[0.0], &[probe()], 3.0).unwrap();
        assert!((r.rows[0].ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(complex_order_bound_check(&[0.0], &[0.0], &[], 2.0).is_err());
        assert!(complex_order_bound_check(&[-1.0], &[0.0], &[probe()], 2.0).is_err());
        assert!(MixedOrder::new(1.0).is_err());
    }
}
