//! Space-time mollification, nested domains, smooth cutoffs and the
//! a-priori potential bounds on localized fields.

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{Grid, GridFunction};
use crate::potentials::bessel_xt;
use crate::verdict::Verdict;

/// `exp(-1/(1 - |z|^2))` on the open unit ball, zero outside.
pub fn bump(z2: f64) -> f64 {
    if z2 < 1.0 {
        (-1.0 / (1.0 - z2)).exp()
    } else {
        0.0
    }
}

/// Mollifier at scale `eps` with the fixed even bump profile.
///
/// The sampled profile is divided by its discrete sum, so constants are
/// reproduced exactly on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mollifier {
    eps: f64,
    /// Offsets (time, space...) with their weights; zero weights dropped.
    taps: Vec<(Vec<isize>, f64)>,
}

impl Mollifier {
    pub fn new(grid: &Grid, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::arg(format!("mollifier scale must be positive, got {eps}")));
        }
        let margin = grid.padding_margin_t().min(grid.padding_margin_x());
        if eps > margin {
            return Err(Error::arg(format!(
                "mollifier scale {eps} exceeds the padding margin {margin}"
            )));
        }
        let (dt, dx) = (grid.dt(), grid.dx());
        if eps < 2.0 * dt.max(dx) {
            log::warn!("mollifier scale {eps} is under-resolved (spacing dt={dt}, dx={dx})");
        }
        let kt = (eps / dt).floor() as isize;
        let kx = (eps / dx).floor() as isize;
        let d = grid.dim();
        let mut taps = Vec::new();
        let mut offset = vec![-kx; d];
        for it in -kt..=kt {
            let zt = it as f64 * dt / eps;
            offset.iter_mut().for_each(|o| *o = -kx);
            loop {
                let z2 = zt * zt
                    + offset.iter().map(|&o| (o as f64 * dx / eps).powi(2)).sum::<f64>();
                let w = bump(z2);
                if w > 0.0 {
                    let mut full = Vec::with_capacity(d + 1);
                    full.push(it);
                    full.extend_from_slice(&offset);
                    taps.push((full, w));
                }
                if !advance(&mut offset, -kx, kx) {
                    break;
                }
            }
        }
        if taps.is_empty() {
            taps.push((vec![0; d + 1], 1.0));
        }
        let total: f64 = taps.iter().map(|t| t.1).sum();
        taps.iter_mut().for_each(|t| t.1 /= total);
        Ok(Mollifier { eps, taps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn weights(&self) -> impl Iterator<Item = (&[isize], f64)> {
        self.taps.iter().map(|(o, w)| (o.as_slice(), *w))
    }

    /// Periodic discrete convolution `sum_k w_k g(n - k)`, componentwise.
    pub fn apply(&self, g: &GridFunction) -> GridFunction {
        let grid = *g.grid();
        let (nt, n, d, comps) = (grid.n_t() as isize, grid.n_x() as isize, grid.dim(), grid.components());
        let s = grid.spatial_nodes();
        // Flat source offsets precomputed per tap are not possible on a torus,
        // so wrap each coordinate.
        let src = g.values();
        let node = |p: usize| -> Vec<Complex64> {
            let it = (p / s) as isize;
            let mut multi = vec![0usize; d];
            grid.spatial_multi_index(p % s, &mut multi);
            let mut acc = vec![Complex64::new(0.0, 0.0); comps];
            let mut m = vec![0usize; d];
            for (off, w) in &self.taps {
                let jt = (it - off[0]).rem_euclid(nt) as usize;
                for k in 0..d {
                    m[k] = (multi[k] as isize - off[k + 1]).rem_euclid(n) as usize;
                }
                let base = grid.index(jt, grid.spatial_flat_index(&m), 0);
                for c in 0..comps {
                    acc[c] += src[base + c] * *w;
                }
            }
            acc
        };
        let nodes = grid.nodes();
        #[cfg(feature = "parallel")]
        let out: Vec<Complex64> = (0..nodes).into_par_iter().flat_map_iter(node).collect();
        #[cfg(not(feature = "parallel"))]
        let out: Vec<Complex64> = (0..nodes).flat_map(node).collect();
        GridFunction::new(grid, out).expect("convex combination of finite values")
    }
}

fn advance(idx: &mut [isize], lo: isize, hi: isize) -> bool {
    for v in idx.iter_mut().rev() {
        if *v < hi {
            *v += 1;
            return true;
        }
        *v = lo;
    }
    false
}

/// `g_eps`: mollification of `g` at scale `eps`.
pub fn mollify(g: &GridFunction, eps: f64) -> Result<GridFunction> {
    Ok(Mollifier::new(g.grid(), eps)?.apply(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// Smallest gap between `self` and a strictly larger `outer`.
    fn margin_in(&self, outer: &Interval) -> f64 {
        (self.lo - outer.lo).min(outer.hi - self.hi)
    }
}

/// Three nested intervals `inner ⋐ middle ⋐ outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nested {
    pub outer: Interval,
    pub middle: Interval,
    pub inner: Interval,
}

impl Nested {
    pub fn margins(&self) -> (f64, f64) {
        (self.middle.margin_in(&self.outer), self.inner.margin_in(&self.middle))
    }

    /// Shrinks every level towards the centre of `outer` by a factor.
    pub fn centered(len: f64, fractions: [f64; 3]) -> Self {
        let c = len / 2.0;
        let iv = |f: f64| Interval::new(c - f * len / 2.0, c + f * len / 2.0);
        Nested { outer: iv(fractions[0]), middle: iv(fractions[1]), inner: iv(fractions[2]) }
    }

    fn validate(&self, name: &str, len: f64) -> Result<()> {
        let (m1, m2) = self.margins();
        if !(m1 > 0.0 && m2 > 0.0) {
            return Err(Error::arg(format!("{name} intervals need strictly positive margins")));
        }
        let pad = len / 8.0;
        let slack = 1e-12 * len;
        if self.outer.lo < pad - slack || self.outer.hi > len - pad + slack {
            return Err(Error::arg(format!(
                "{name} outer interval [{}, {}] leaves less than {pad} padding in a box of length {len}",
                self.outer.lo, self.outer.hi
            )));
        }
        Ok(())
    }
}

/// Nested time intervals and spatial cubes (same interval on every axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedDomains {
    pub time: Nested,
    pub space: Nested,
}

impl NestedDomains {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.time.validate("time", grid.len_t())?;
        self.space.validate("space", grid.len_x())
    }

    /// Domains filling the central 3/4, 1/2 and 1/4 of each axis.
    pub fn standard(grid: &Grid) -> Self {
        NestedDomains {
            time: Nested::centered(grid.len_t(), [0.75, 0.5, 0.25]),
            space: Nested::centered(grid.len_x(), [0.75, 0.5, 0.25]),
        }
    }

    pub fn min_margin(&self) -> f64 {
        let (a, b) = self.time.margins();
        let (c, e) = self.space.margins();
        a.min(b).min(c).min(e)
    }

    /// Whether `(t, x)` lies in `I_level x Q_level` (`0` outer, `1` middle, `2` inner).
    pub fn contains(&self, level: usize, t: f64, x: &[f64]) -> bool {
        let pick = |n: &Nested| match level {
            0 => n.outer,
            1 => n.middle,
            _ => n.inner,
        };
        let (it, iq) = (pick(&self.time), pick(&self.space));
        it.contains(t) && x.iter().all(|&v| iq.contains(v))
    }
}

/// Smooth step from 0 at `z <= 0` to 1 at `z >= 1`, flat to all orders at both ends.
pub fn smoothstep(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / z).exp();
        let b = (-1.0 / (1.0 - z)).exp();
        a / (a + b)
    }
}

/// 1 on `inner`, 0 off `middle`, smooth in between.
fn ramp(n: &Nested, x: f64) -> f64 {
    let up = smoothstep((x - n.middle.lo) / (n.inner.lo - n.middle.lo));
    let down = smoothstep((n.middle.hi - x) / (n.middle.hi - n.inner.hi));
    up.min(down)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub chi: GridFunction,
    pub domains: NestedDomains,
}

/// Tensor product of smooth ramps: `1` on `I'' x Q''`, `0` off `I' x Q'`.
pub fn build_cutoff(grid: &Grid, nd: &NestedDomains) -> Result<Cutoff> {
    nd.validate(grid)?;
    let chi = GridFunction::from_real_fn(grid.with_components(1)?, |t, x, _| {
        ramp(&nd.time, t) * x.iter().map(|&v| ramp(&nd.space, v)).product::<f64>()
    })?;
    Ok(Cutoff { chi, domains: *nd })
}

impl Cutoff {
    /// `chi * u` for a field with any number of components.
    pub fn localize(&self, u: &GridFunction) -> Result<GridFunction> {
        u.multiply_scalar_field(&self.chi)
    }

    /// Largest forward difference quotient of `chi` along any axis.
    pub fn max_discrete_gradient(&self) -> f64 {
        let g = *self.chi.grid();
        let v = self.chi.values();
        let s = g.spatial_nodes();
        let mut best = 0.0f64;
        let mut multi = vec![0usize; g.dim()];
        for it in 0..g.n_t() {
            for ix in 0..s {
                let here = v[g.index(it, ix, 0)].re;
                let next_t = v[g.index((it + 1) % g.n_t(), ix, 0)].re;
                best = best.max((next_t - here).abs() / g.dt());
                g.spatial_multi_index(ix, &mut multi);
                for k in 0..g.dim() {
                    let mut m = multi.clone();
                    m[k] = (m[k] + 1) % g.n_x();
                    let nb = v[g.index(it, g.spatial_flat_index(&m), 0)].re;
                    best = best.max((nb - here).abs() / g.dx());
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriRow {
    pub eps: f64,
    /// `||J_x^{-1} v_eps||_{p + delta}`
    pub space_norm: f64,
    /// `||J_t^{-1} J_x v_eps||_{p'}`
    pub time_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub rows: Vec<AprioriRow>,
    pub exponents: ExponentSet,
    pub space_verdict: Verdict,
    pub time_verdict: Verdict,
    pub verdict: Verdict,
}

/// Whether the values at the two smallest `eps` (last two entries) lie within
/// 10% of the median over all `eps`.
pub fn stable_tail(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    values[n.saturating_sub(2)..]
        .iter()
        .all(|v| (v - median).abs() <= 0.1 * median.abs())
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 2 {
        return Err(Error::arg("eps_list needs at least two entries"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::arg("eps_list must be positive and strictly decreasing"));
    }
    Ok(())
}

/// Norms of `v_eps = (chi u)_eps` at each scale and the bounded-in-eps verdicts.
pub fn apriori_bounds_check(
    u: &GridFunction,
    chi: &Cutoff,
    eps_list: &[f64],
    exps: &ExponentSet,
) -> Result<AprioriReport> {
    check_eps_list(eps_list)?;
    let v = chi.localize(u)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let ve = mollify(&v, eps)?;
        let space_norm = bessel_xt(&ve, -1.0, 0.0)?.lp_norm(exps.p + exps.delta);
        let time_norm = bessel_xt(&ve, 1.0, -1.0)?.lp_norm(exps.p_prime);
        if space_norm.is_nan() || time_norm.is_nan() {
            return Err(Error::InvalidField(format!("norm evaluation produced NaN at eps = {eps}")));
        }
        rows.push(AprioriRow { eps, space_norm, time_norm });
    }
    let sv = Verdict::from_bool(stable_tail(&rows.iter().map(|r| r.space_norm).collect::<Vec<_>>()));
    let tv = Verdict::from_bool(stable_tail(&rows.iter().map(|r| r.time_norm).collect::<Vec<_>>()));
    Ok(AprioriReport { rows, exponents: *exps, space_verdict: sv, time_verdict: tv, verdict: sv.and(tv) })
}
