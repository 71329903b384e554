//! Exponentially convergent quadrature rules used by the kernel oracles.
//!
//! * [`real_line`]: trapezoid rule on the whole real line with step halving,
//!   for integrands with fast decay at both ends (the subordination integrals
//!   in `log delta`).
//! * [`tanh_sinh`]: double-exponential rule on a finite interval, tolerant of
//!   integrable endpoint singularities.

use crate::error::{Error, Result};

const MAX_WALK: usize = 20_000;
const MAX_LEVELS: usize = 14;

/// Relative threshold below which the tail of the integrand is dropped.
const TAIL: f64 = 1e-19;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates a vector-valued `f` over the real line.
///
/// `f(u, out)` writes the integrand at `u` into `out` (length `dim`).
/// `center` should sit near the bulk of the integrand and `width` is its
/// rough scale. Sampling walks outward from `center` until the integrand
/// drops below `1e-19` of its largest value, then halves the step until the
/// max-norm relative change between levels is at most `tol`.
pub fn real_line<F>(f: F, center: f64, width: f64, dim: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    if !(width > 0.0 && width.is_finite() && center.is_finite()) {
        return Err(Error::arg("quadrature needs a finite center and positive width"));
    }
    let h0 = width / 2.0;
    let mut buf = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    let mut peak = 0.0f64;

    f(center, &mut buf);
    peak = peak.max(max_abs(&buf));
    add(&mut sum, &buf, 1.0);
    let mut bounds = [0i64; 2];
    for (side, sign) in [(0usize, -1i64), (1, 1)] {
        let mut quiet = 0;
        let mut k = 0i64;
        loop {
            k += sign;
            if k.unsigned_abs() as usize > MAX_WALK {
                return Err(Error::QuadratureNonConvergence { achieved: f64::INFINITY });
            }
            f(center + k as f64 * h0, &mut buf);
            let m = max_abs(&buf);
            if !m.is_finite() {
                return Err(Error::QuadratureNonConvergence { achieved: f64::NAN });
            }
            peak = peak.max(m);
            add(&mut sum, &buf, 1.0);
            quiet = if m <= TAIL * peak { quiet + 1 } else { 0 };
            if quiet >= 3 {
                break;
            }
        }
        bounds[side] = k;
    }
    let mut est: Vec<f64> = sum.iter().map(|s| s * h0).collect();

    let (lo, hi) = (bounds[0], bounds[1]);
    let mut h = h0;
    let mut change = f64::INFINITY;
    for level in 1..=MAX_LEVELS {
        h /= 2.0;
        let stride = 1i64 << level;
        let mut odd = vec![0.0; dim];
        // New nodes sit at odd multiples of h inside [lo h0, hi h0].
        let first = lo * stride + 1;
        let last = hi * stride - 1;
        let mut k = first;
        while k <= last {
            f(center + k as f64 * h, &mut buf);
            add(&mut odd, &buf, 1.0);
            k += 2;
        }
        let next: Vec<f64> = est.iter().zip(&odd).map(|(e, o)| e / 2.0 + h * o).collect();
        let scale = max_abs(&next);
        change = est
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        change = if scale > 0.0 { change / scale } else { change };
        est = next;
        if level >= 2 && change <= tol {
            return Ok(est);
        }
    }
    Err(Error::QuadratureNonConvergence { achieved: change })
}

/// Scalar convenience wrapper around [`real_line`].
pub fn real_line_scalar<F>(f: F, center: f64, width: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    real_line(|u, out| out[0] = f(u), center, width, 1, tol).map(|v| v[0])
}

fn add(acc: &mut [f64], v: &[f64], w: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += w * b;
    }
}

/// Node and weight of the tanh-sinh rule on `[a, b]` at parameter `t`.
///
/// Distances to the endpoints are formed without cancellation, so nodes
/// crowd onto the endpoints without collapsing onto them.
fn tanh_sinh_node(a: f64, b: f64, t: f64) -> (f64, f64) {
    let y = std::f64::consts::FRAC_PI_2 * t.sinh();
    let e = (-2.0 * y.abs()).exp();
    let near = (b - a) * e / (1.0 + e);
    let x = if y < 0.0 { a + near } else { b - near };
    let c = y.cosh();
    let w = (b - a) * std::f64::consts::FRAC_PI_2 * t.cosh() / (2.0 * c * c);
    (x, w)
}

/// Tanh-sinh quadrature of `f` over `[a, b]`.
///
/// Nodes that land on an endpoint in floating point are skipped; their
/// weights are far below double precision.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    tanh_sinh_vec(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

/// Vector-valued form of [`tanh_sinh`]; convergence is judged in the max norm.
pub fn tanh_sinh_vec<F>(f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64]),
{
    if !(a < b) {
        return Err(Error::arg("tanh-sinh needs a < b"));
    }
    let t_max = 4.0;
    let mut buf = vec![0.0; dim];
    let mut eval = |t: f64, acc: &mut [f64]| -> Result<()> {
        let (x, w) = tanh_sinh_node(a, b, t);
        if x <= a || x >= b || w == 0.0 {
            return Ok(());
        }
        f(x, &mut buf);
        for (s, v) in acc.iter_mut().zip(&buf) {
            let term = v * w;
            if !term.is_finite() {
                return Err(Error::QuadratureNonConvergence { achieved: f64::NAN });
            }
            *s += term;
        }
        Ok(())
    };
    let mut h = 0.5;
    let mut sum = vec![0.0; dim];
    eval(0.0, &mut sum)?;
    let mut k = 1;
    while k as f64 * h <= t_max {
        eval(k as f64 * h, &mut sum)?;
        eval(-(k as f64) * h, &mut sum)?;
        k += 1;
    }
    let mut est: Vec<f64> = sum.iter().map(|s| s * h).collect();
    let mut change = f64::INFINITY;
    for level in 1..=MAX_LEVELS {
        h /= 2.0;
        let mut odd = vec![0.0; dim];
        let mut k = 1;
        while k as f64 * h <= t_max {
            eval(k as f64 * h, &mut odd)?;
            eval(-(k as f64) * h, &mut odd)?;
            k += 2;
        }
        let next: Vec<f64> = est.iter().zip(&odd).map(|(e, o)| e / 2.0 + h * o).collect();
        let scale = max_abs(&next);
        change = est
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        change = if scale > 0.0 { change / scale } else { change };
        est = next;
        if level >= 2 && change <= tol {
            return Ok(est);
        }
    }
    Err(Error::QuadratureNonConvergence { achieved: change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_on_line() {
        let v = real_line_scalar(|u| (-u * u).exp(), 0.3, 1.0, 1e-13).unwrap();
        assert!((v - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn vector_valued_line() {
        let v = real_line(
            |u, out| {
                out[0] = (-u * u).exp();
                out[1] = (-2.0 * u * u).exp();
            },
            0.0,
            0.7,
            2,
            1e-13,
        )
        .unwrap();
        assert!((v[0] - PI.sqrt()).abs() < 1e-13);
        assert!((v[1] - (PI / 2.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_integral_in_log_coordinates() {
        // int_0^inf x^{a-1} e^{-x} dx with x = e^u
        let a: f64 = 0.3;
        let v = real_line_scalar(|u| (a * u - u.exp()).exp(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - libm::tgamma(a)).abs() < 1e-10 * libm::tgamma(a));
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let v = tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        let v = tanh_sinh(|x| (1.0 - x * x).sqrt(), -1.0, 1.0, 1e-13).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_integrand_reports_failure() {
        assert!(real_line_scalar(|u| u.exp(), 0.0, 1.0, 1e-10).is_err());
    }
}
