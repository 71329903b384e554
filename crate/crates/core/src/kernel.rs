//! Real-space Bessel kernels and convolution oracles.
//!
//! `G^s(r) = 1/((4 pi)^{s/2} Gamma(s/2)) * int_0^inf delta^{(s-d)/2}
//! exp(-pi r^2/delta - delta/(4 pi)) d delta / delta`
//!
//! Nothing here touches the Fourier symbol; these routines exist to cross-check
//! the spectral potentials.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{real_line, real_line_scalar, tanh_sinh, tanh_sinh_vec};

/// Target relative accuracy of the inner `delta` integral.
const KERNEL_TOL: f64 = 1e-11;

fn ln_prefactor(s: f64) -> f64 {
    -(s / 2.0) * (4.0 * PI).ln() - libm::lgamma(s / 2.0)
}

/// `G^s(r)` in dimension `d`, by trapezoid quadrature in `u = ln delta`.
///
/// The integrand is log-concave in `u`; sampling is centred on its maximum and
/// scaled by its curvature there (capped at 2), and the maximum is factored out before
/// exponentiating so tiny and huge `r` stay representable.
pub fn kernel_quadrature(s: f64, r: f64, d: usize) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::arg(format!("kernel order must be positive, got {s}")));
    }
    if d == 0 {
        return Err(Error::arg("dimension must be at least 1"));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::arg(format!("radius must be finite and nonnegative, got {r}")));
    }
    let a = (s - d as f64) / 2.0;
    if r == 0.0 && a <= 0.0 {
        return Err(Error::DivergentKernel { s, dim: d });
    }
    let b = 1.0 / (4.0 * PI);
    // ln(pi r^2); -inf at r = 0 makes every A-term vanish below.
    let ln_a = PI.ln() + 2.0 * r.ln();
    let big_a = ln_a.exp();
    let root = (a * a + 4.0 * big_a * b).sqrt();
    let peak = if a < 0.0 {
        std::f64::consts::LN_2 + ln_a - (root - a).ln()
    } else {
        (a + root).ln() - (2.0 * b).ln()
    };
    let phi = |u: f64| a * u - (ln_a - u).exp() - b * u.exp();
    let phi_peak = phi(peak);
    let curvature = (ln_a - peak).exp() + b * peak.exp();
    // Away from the peak the integrand still bends on an O(1) scale in u,
    // even when the peak itself is flat.
    let width = (1.0 / curvature.sqrt()).min(2.0);
    let integral = real_line_scalar(|u| (phi(u) - phi_peak).exp(), peak, width, KERNEL_TOL)?;
    Ok((phi_peak + ln_prefactor(s)).exp() * integral)
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0)
}

/// Exponent substitution `r = rho^m` on `[0, 1]` that flattens a radial
/// integrand behaving like `r^{-beta}` near the origin.
fn flattening_power(beta: f64, log_singular: bool) -> f64 {
    if beta > 0.0 {
        (1.0 / (1.0 - beta)).min(60.0)
    } else if log_singular {
        3.0
    } else {
        1.0
    }
}

/// Outer radius beyond which `G^s(r)^power r^{d-1}` is negligible.
fn outer_radius(power: f64) -> f64 {
    6.0 + 48.0 / power
}

/// `||G^s||_{L^{qp}(R^d)}` by radial quadrature.
pub fn kernel_lq_norm(s: f64, d: usize, qp: f64) -> Result<f64> {
    if !(qp >= 1.0 && qp.is_finite()) {
        return Err(Error::arg(format!("exponent must lie in [1, inf), got {qp}")));
    }
    let df = d as f64;
    // Near 0, G ~ r^{s-d} (s < d) and the radial integrand ~ r^{-beta}.
    let beta = if s < df { qp * (df - s) - (df - 1.0) } else { -(df - 1.0) };
    if beta >= 1.0 {
        return Err(Error::DivergentKernel { s, dim: d });
    }
    let m = flattening_power(beta, s == df);
    let radial = |r: f64| -> f64 {
        kernel_quadrature(s, r, d)
            .map(|g| g.powf(qp) * r.powi(d as i32 - 1))
            .unwrap_or(f64::NAN)
    };
    // After flattening the integrand is bounded near 0, so nodes whose radius
    // underflows carry no weight worth keeping.
    let inner = tanh_sinh(
        |rho| {
            let r = rho.powf(m);
            if r < 1e-280 {
                0.0
            } else {
                m * rho.powf(m - 1.0) * radial(r)
            }
        },
        0.0,
        1.0,
        1e-10,
    )?;
    let outer = tanh_sinh(radial, 1.0, outer_radius(qp), 1e-10)?;
    Ok((sphere_area(d) * (inner + outer)).powf(1.0 / qp))
}

/// Real-valued Gaussian probe `exp(-|x - c|^2 / (2 w^2))`, periodized on the
/// spatial box of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProbe {
    pub center: Vec<f64>,
    pub width: f64,
}

impl GaussianProbe {
    pub fn centered(grid: &Grid, width: f64) -> Self {
        GaussianProbe { center: vec![grid.len_x() / 2.0; grid.dim()], width }
    }

    fn images(len: f64, std: f64) -> i64 {
        (12.0 * std / len).ceil() as i64 + 1
    }

    /// Periodized 1-D Gaussian of variance `var` centred at `c`, times `amp`.
    fn periodic_1d(x: f64, c: f64, var: f64, len: f64, amp: f64) -> f64 {
        let m = Self::images(len, var.sqrt());
        (-m..=m)
            .map(|k| {
                let y = x - c - k as f64 * len;
                (-y * y / (2.0 * var)).exp()
            })
            .sum::<f64>()
            * amp
    }

    /// Value of the probe at a spatial point.
    pub fn eval(&self, x: &[f64], len: f64) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(&xi, &c)| Self::periodic_1d(xi, c, self.width * self.width, len, 1.0))
            .product()
    }

    /// Samples on the spatial nodes of `grid`.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        let mut x = vec![0.0; grid.dim()];
        (0..grid.spatial_nodes())
            .map(|ix| {
                grid.spatial_coords(ix, &mut x);
                self.eval(&x, grid.len_x())
            })
            .collect()
    }
}

/// `G^s * f` on the spatial nodes of `grid` for a Gaussian probe `f`, via the
/// kernel's integral representation with the order of integration swapped.
///
/// For each `delta`, convolving the heat kernel `delta^{-d/2} exp(-pi|x|^2/delta)`
/// with a Gaussian is again a Gaussian, so the remaining `delta` integral is
/// done by [`real_line`] over the whole field at once.
pub fn oracle_subordination(grid: &Grid, probe: &GaussianProbe, s: f64) -> Result<Vec<f64>> {
    if !(s > 0.0) {
        return Err(Error::arg("subordination oracle needs s > 0"));
    }
    let d = grid.dim();
    let n = grid.n_x();
    let len = grid.len_x();
    let w2 = probe.width * probe.width;
    let nodes = grid.spatial_nodes();
    let integrand = |u: f64, out: &mut [f64]| {
        let delta = u.exp();
        let weight = ((s / 2.0) * u - delta / (4.0 * PI)).exp();
        let var = w2 + delta / (2.0 * PI);
        let amp = (w2 / var).sqrt();
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        GaussianProbe::periodic_1d(
                            i as f64 * len / n as f64,
                            probe.center[k],
                            var,
                            len,
                            amp,
                        )
                    })
                    .collect()
            })
            .collect();
        let mut multi = vec![0usize; d];
        for (ix, o) in out.iter_mut().enumerate() {
            grid.spatial_multi_index(ix, &mut multi);
            *o = weight * multi.iter().enumerate().map(|(k, &i)| axes[k][i]).product::<f64>();
        }
    };
    let peak = (2.0 * PI * s).ln();
    let width = (2.0 / s).sqrt();
    let v = real_line(integrand, peak, width, nodes, 1e-12)?;
    let c = ln_prefactor(s).exp();
    Ok(v.into_iter().map(|x| c * x).collect())
}

/// `G^s * f` in one dimension by direct radial integration against
/// [`kernel_quadrature`]: `int_0^R G(r) (f(x - r) + f(x + r)) dr`.
pub fn oracle_radial_1d(grid: &Grid, probe: &GaussianProbe, s: f64) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::arg("radial oracle is one-dimensional"));
    }
    let n = grid.n_x();
    let len = grid.len_x();
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * len / n as f64).collect();
    let integrand = |r: f64, jac: f64, out: &mut [f64]| {
        let g = kernel_quadrature(s, r, 1).unwrap_or(f64::NAN) * jac;
        for (o, &x) in out.iter_mut().zip(&xs) {
            *o = g * (probe.eval(&[x - r], len) + probe.eval(&[x + r], len));
        }
    };
    let beta = if s < 1.0 { 1.0 - s } else { 0.0 };
    let m = flattening_power(beta, s == 1.0);
    let mut total = tanh_sinh_vec(
        |rho, out| {
            let r = rho.powf(m);
            if r < 1e-280 {
                out.fill(0.0);
            } else {
                integrand(r, m * rho.powf(m - 1.0), out)
            }
        },
        0.0,
        1.0,
        n,
        1e-10,
    )?;
    // Panels no wider than the probe keep the outer rule well resolved.
    let r_max = outer_radius(1.0);
    let panel = probe.width.min(1.0);
    let mut lo = 1.0;
    while lo < r_max {
        let hi = (lo + panel).min(r_max);
        let part = tanh_sinh_vec(|r, out| integrand(r, 1.0, out), lo, hi, n, 1e-10)?;
        total.iter_mut().zip(part).for_each(|(t, p)| *t += p);
        lo = hi;
    }
    Ok(total)
}
