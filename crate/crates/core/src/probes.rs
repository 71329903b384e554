//! Deterministic probe fields for the operator checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{Grid, GridFunction};

/// Real trigonometric polynomial with `modes` random terms whose wavenumbers
/// lie in the central half-band `|k| < n/4` on every axis, normalized to
/// maximum amplitude one before sampling.
///
/// Wavenumbers are drawn against `band_grid`, so sampling the same seed on a
/// refined grid reproduces the same continuous function.
pub fn band_limited(grid: &Grid, band_grid: &Grid, seed: u64, modes: usize) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let kt_max = (band_grid.n_t() / 4) as i64;
    let kx_max = (band_grid.n_x() / 4) as i64;
    let terms: Vec<(Vec<f64>, f64, f64, usize)> = (0..modes)
        .map(|_| {
            let mut w = Vec::with_capacity(d + 1);
            w.push(2.0 * PI * rng.gen_range(-kt_max + 1..kt_max) as f64 / grid.len_t());
            for _ in 0..d {
                w.push(2.0 * PI * rng.gen_range(-kx_max + 1..kx_max) as f64 / grid.len_x());
            }
            let amp = rng.gen_range(-1.0..1.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let comp = rng.gen_range(0..grid.components());
            (w, amp, phase, comp)
        })
        .collect();
    let scale = 1.0 / terms.iter().map(|t| t.1.abs()).sum::<f64>().max(1e-300);
    GridFunction::from_fn(*grid, |t, x, c| {
        let v: f64 = terms
            .iter()
            .filter(|term| term.3 == c)
            .map(|(w, a, ph, _)| {
                let arg = w[0] * t + w[1..].iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>();
                a * (arg + ph).cos()
            })
            .sum();
        Complex64::new(v * scale, 0.0)
    })
}

/// Space-time Gaussian centred in the box, widths given as fractions of
/// the side lengths.
pub fn gaussian(grid: &Grid, width_t: f64, width_x: f64) -> Result<GridFunction> {
    let (ct, cx) = (grid.len_t() / 2.0, grid.len_x() / 2.0);
    let (st, sx) = (width_t * grid.len_t(), width_x * grid.len_x());
    GridFunction::from_real_fn(*grid, |t, x, _| {
        let r2: f64 = x.iter().map(|v| (v - cx).powi(2)).sum();
        (-(t - ct).powi(2) / (2.0 * st * st) - r2 / (2.0 * sx * sx)).exp()
    })
}

/// Compactly supported `exp(-1/(1 - r^2))` bump on the ellipsoid with
/// semi-axes `radius * L` centred in the box.
pub fn bump(grid: &Grid, radius: f64) -> Result<GridFunction> {
    let (ct, cx) = (grid.len_t() / 2.0, grid.len_x() / 2.0);
    let (rt, rx) = (radius * grid.len_t(), radius * grid.len_x());
    GridFunction::from_real_fn(*grid, |t, x, _| {
        let r2 = ((t - ct) / rt).powi(2) + x.iter().map(|v| ((v - cx) / rx).powi(2)).sum::<f64>();
        crate::mollify::bump(r2)
    })
}

/// Independent standard normal samples (Box-Muller) at every node and component.
pub fn white_noise(grid: &Grid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            Complex64::new((-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos(), 0.0)
        })
        .collect();
    GridFunction::new(*grid, values).expect("finite samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_limited_is_reproducible_and_refinable() {
        let g = Grid::new(1, 16, 16, 2.0, 3.0, 1).unwrap();
        let fine = g.refined(2).unwrap();
        let a = band_limited(&g, &g, 7, 5).unwrap();
        let b = band_limited(&fine, &g, 7, 5).unwrap();
        // Every other node of the fine grid coincides with a coarse node.
        for it in 0..g.n_t() {
            for ix in 0..g.n_x() {
                let va = a.get(it, ix, 0);
                let vb = b.get(2 * it, 2 * ix, 0);
                assert!((va - vb).norm() < 1e-13);
            }
        }
        assert_eq!(a, band_limited(&g, &g, 7, 5).unwrap());
    }
}
