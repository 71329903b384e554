//! Browser bindings for three small operations of the toolkit.
//!
//! Every export returns a flat `Float64Array`; the layout is documented per
//! function and unpacked in `www/demo.js`.

use num_complex::Complex64;
use parareg::exponents::q_theta;
use parareg::interpolation::{default_a_grid, default_b_grid, dual_element, sample_h, three_lines_check};
use parareg::lp_holder::{holder_estimate, DyadicPartition};
use parareg::mollify::{mollify, smoothstep};
use parareg::potentials::{bessel_x, bessel_xt, PotentialOrder};
use parareg::probes::band_limited;
use parareg::{Grid, GridFunction, TimeLine};
use wasm_bindgen::prelude::*;

fn js(e: parareg::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `J_x^{s}` of a unit Gaussian on `[0, 8)` with `n` points.
///
/// Layout: `[x_0..x_{n-1}, f_0.., re(J^s f)_0.., im(J^s f)_0..]`.
#[wasm_bindgen]
pub fn bessel_profile(n: usize, s_re: f64, s_im: f64) -> Result<Vec<f64>, JsError> {
    let g = Grid::new(1, 4, n, 1.0, 8.0, 1).map_err(js)?;
    let f = GridFunction::from_real_fn(g, |_, x, _| (-(x[0] - 4.0).powi(2) / 0.5).exp()).map_err(js)?;
    let out = bessel_x(&f, PotentialOrder::new(s_re, s_im).map_err(js)?).map_err(js)?;
    let mut v = Vec::with_capacity(4 * n);
    v.extend((0..n).map(|i| i as f64 * g.dx()));
    v.extend(f.time_slice(0).iter().map(|z| z.re));
    v.extend(out.time_slice(0).iter().map(|z| z.re));
    v.extend(out.time_slice(0).iter().map(|z| z.im));
    Ok(v)
}

/// Three-lines picture for one band-limited probe on a 16 x 16 grid.
///
/// Layout: `[h_theta, bound, a_0, M_0, a_1, M_1, ...]` with `M_a = sup_b |H(a + ib)|`.
#[wasm_bindgen]
pub fn three_lines_profile(theta: f64, q0: f64, q1: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let g = Grid::new(1, 16, 16, 2.0, 2.0, 1).map_err(js)?;
    let f = band_limited(&g, &g, seed as u64, 5).map_err(js)?;
    let qt = q_theta(theta, q0, q1);
    let phi = dual_element(&bessel_xt(&f, 2.0 * theta - 1.0, -theta).map_err(js)?, qt).map_err(js)?;
    let ss = sample_h(&f, &phi, theta, q0, q1, default_a_grid(theta, 11), default_b_grid(13)).map_err(js)?;
    let r = three_lines_check(&ss);
    let mut v = vec![r.h_theta, r.bound];
    for (a, m) in r.line_sups {
        v.push(a);
        v.push(m);
    }
    Ok(v)
}

fn demo_line(kind: u32, n: usize) -> Result<TimeLine, JsError> {
    let l = 2.0 * std::f64::consts::PI;
    let dt = l / n as f64;
    let sample = |f: &dyn Fn(f64) -> f64| TimeLine::scalar(dt, &(0..n).map(|i| f(i as f64 * dt)).collect::<Vec<_>>());
    Ok(match kind {
        0 => sample(&|t| {
            let r = (t - l / 2.0).abs();
            r.sqrt() * (1.0 - smoothstep(r - 1.0))
        }),
        1 => sample(&|t| (3.0 * t).sin() + 0.5 * (7.0 * t).cos()),
        _ => {
            let g = Grid::new(1, n, 4, l, l, 1).map_err(js)?;
            let step = GridFunction::from_fn(g, |t, _, _| Complex64::new(if (t - l / 2.0).abs() < 1.5 { 1.0 } else { 0.0 }, 0.0))
                .map_err(js)?;
            mollify(&step, 0.3).map_err(js)?.time_line(0)
        }
    })
}

/// Direct and Littlewood-Paley Hölder quotients of a demo line.
///
/// `kind`: 0 windowed `|t - pi|^{1/2}`, 1 two sines, 2 mollified step.
/// Layout: `[direct, lp, f_0, ..., f_{n-1}]`.
#[wasm_bindgen]
pub fn holder_quotients(kind: u32, n: usize, alpha: f64) -> Result<Vec<f64>, JsError> {
    let line = demo_line(kind, n)?;
    let dp = DyadicPartition::new(line.period(), n).map_err(js)?;
    let e = holder_estimate(&line, alpha, &dp).map_err(js)?;
    let mut v = vec![e.direct_value, e.lp_value];
    v.extend(line.values.iter().map(|z| z.re));
    Ok(v)
}
