//! Fourier multipliers on the periodic grid and a sampled Mihlin-constant estimate.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Direction};
use crate::grid::{angular_frequency, Grid, GridFunction, TimeLine};

/// Which frequency variables a symbol reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisSet {
    Time,
    Space,
    SpaceTime,
}

impl AxisSet {
    pub fn reads_time(self) -> bool {
        matches!(self, AxisSet::Time | AxisSet::SpaceTime)
    }

    pub fn reads_space(self) -> bool {
        matches!(self, AxisSet::Space | AxisSet::SpaceTime)
    }

    fn union(self, other: AxisSet) -> AxisSet {
        let t = self.reads_time() || other.reads_time();
        let s = self.reads_space() || other.reads_space();
        match (t, s) {
            (true, true) => AxisSet::SpaceTime,
            (true, false) => AxisSet::Time,
            _ => AxisSet::Space,
        }
    }
}

type SymbolFn = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// A Fourier multiplier `m`, read as a function of the continuous frequency
/// vector `(tau, xi_1, ..., xi_d)` restricted to the axes in [`AxisSet`].
///
/// The frequency slice handed to the symbol holds `tau` first (when time is
/// read) followed by the spatial frequencies (when space is read).
#[derive(Clone)]
pub struct SpectralMultiplier {
    symbol: Arc<SymbolFn>,
    at_zero: Option<Complex64>,
    axes: AxisSet,
    space_dim: usize,
    declared_smoothness: usize,
}

impl fmt::Debug for SpectralMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralMultiplier")
            .field("axes", &self.axes)
            .field("space_dim", &self.space_dim)
            .field("declared_smoothness", &self.declared_smoothness)
            .field("at_zero", &self.at_zero)
            .finish()
    }
}

impl SpectralMultiplier {
    pub fn new<F>(axes: AxisSet, space_dim: usize, declared_smoothness: usize, symbol: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        SpectralMultiplier {
            symbol: Arc::new(symbol),
            at_zero: None,
            axes,
            space_dim: if axes.reads_space() { space_dim } else { 0 },
            declared_smoothness,
        }
    }

    /// Symbol of the time frequency only.
    pub fn temporal<F>(symbol: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(AxisSet::Time, 0, usize::MAX, move |w| symbol(w[0]))
    }

    /// Symbol of the spatial frequencies only.
    pub fn spatial<F>(space_dim: usize, symbol: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(AxisSet::Space, space_dim, usize::MAX, symbol)
    }

    /// `xi -> h(|xi|^2)` on the spatial axes.
    pub fn radial_spatial<F>(space_dim: usize, h: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self::spatial(space_dim, move |xi| h(xi.iter().map(|v| v * v).sum()))
    }

    pub fn identity(axes: AxisSet, space_dim: usize) -> Self {
        Self::new(axes, space_dim, usize::MAX, |_| Complex64::new(1.0, 0.0))
    }

    /// Value used at the zero frequency instead of calling the symbol.
    pub fn with_zero_value(mut self, value: Complex64) -> Self {
        self.at_zero = Some(value);
        self
    }

    pub fn with_declared_smoothness(mut self, k: usize) -> Self {
        self.declared_smoothness = k;
        self
    }

    pub fn axes(&self) -> AxisSet {
        self.axes
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }

    pub fn declared_smoothness(&self) -> usize {
        self.declared_smoothness
    }

    /// Dimension of the frequency vector the symbol reads.
    pub fn freq_dim(&self) -> usize {
        usize::from(self.axes.reads_time()) + self.space_dim
    }

    pub fn eval(&self, freq: &[f64]) -> Complex64 {
        match self.at_zero {
            Some(z) if freq.iter().all(|&w| w == 0.0) => z,
            _ => (self.symbol)(freq),
        }
    }

    /// Pointwise product `self * other` of two symbols.
    pub fn product(&self, other: &SpectralMultiplier) -> Result<SpectralMultiplier> {
        if self.axes.reads_space() && other.axes.reads_space() && self.space_dim != other.space_dim
        {
            return Err(Error::IncompatibleMultiplier(format!(
                "spatial dimensions differ: {} vs {}",
                self.space_dim, other.space_dim
            )));
        }
        let axes = self.axes.union(other.axes);
        let d = self.space_dim.max(other.space_dim);
        let (a, b) = (self.clone(), other.clone());
        let project = move |m: &SpectralMultiplier, w: &[f64]| -> Complex64 {
            // `w` is laid out for `axes`: [tau?, xi...].
            let has_t = axes.reads_time();
            let (tau, xi) = if has_t { (&w[..1], &w[1..]) } else { (&w[..0], w) };
            let mut buf = Vec::with_capacity(m.freq_dim());
            if m.axes.reads_time() {
                buf.extend_from_slice(tau);
            }
            if m.axes.reads_space() {
                buf.extend_from_slice(xi);
            }
            m.eval(&buf)
        };
        let zero = match (self.at_zero, other.at_zero) {
            (None, None) => None,
            _ => {
                let zeros = vec![0.0; usize::from(axes.reads_time()) + d];
                Some(project(&a, &zeros) * project(&b, &zeros))
            }
        };
        let mut m = SpectralMultiplier::new(
            axes,
            d,
            self.declared_smoothness.min(other.declared_smoothness),
            move |w| project(&a, w) * project(&b, w),
        );
        m.at_zero = zero;
        Ok(m)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.axes.reads_space() && self.space_dim != grid.dim() {
            return Err(Error::IncompatibleMultiplier(format!(
                "symbol reads {} spatial frequencies, grid has dimension {}",
                self.space_dim,
                grid.dim()
            )));
        }
        Ok(())
    }

    /// Symbol values on the frequency nodes of `grid`, indexed by
    /// `it * S + ix` where either factor collapses to one when the axis is not read.
    fn table(&self, grid: &Grid) -> Result<SymbolTable> {
        self.check_grid(grid)?;
        let nt = if self.axes.reads_time() { grid.n_t() } else { 1 };
        let ns = if self.axes.reads_space() { grid.spatial_nodes() } else { 1 };
        let mut values = Vec::with_capacity(nt * ns);
        let mut freq = vec![0.0; self.freq_dim()];
        let mut multi = vec![0usize; grid.dim()];
        let off = usize::from(self.axes.reads_time());
        for it in 0..nt {
            if self.axes.reads_time() {
                freq[0] = angular_frequency(it, grid.n_t(), grid.len_t());
            }
            for ix in 0..ns {
                if self.axes.reads_space() {
                    grid.spatial_multi_index(ix, &mut multi);
                    for (k, &i) in multi.iter().enumerate() {
                        freq[off + k] = angular_frequency(i, grid.n_x(), grid.len_x());
                    }
                }
                let v = self.eval(&freq);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::SymbolNotFinite { freq: freq.clone() });
                }
                values.push(v);
            }
        }
        Ok(SymbolTable {
            values,
            time: self.axes.reads_time(),
            space: self.axes.reads_space(),
        })
    }
}

struct SymbolTable {
    values: Vec<Complex64>,
    time: bool,
    space: bool,
}

impl SymbolTable {
    fn multiply(&self, values: &mut [Complex64], grid: &Grid) {
        let s = grid.spatial_nodes();
        let n = grid.components();
        let ns = if self.space { s } else { 1 };
        for (p, v) in values.iter_mut().enumerate() {
            let node = p / n;
            let it = if self.time { node / s } else { 0 };
            let ix = if self.space { node % s } else { 0 };
            *v *= self.values[it * ns + ix];
        }
    }
}

/// Unitary DFT over every axis.
pub fn forward_transform(f: &GridFunction) -> GridFunction {
    let mut values = f.values().to_vec();
    fft::transform(&mut values, f.grid(), true, true, Direction::Forward);
    GridFunction::new(*f.grid(), values).expect("unitary transform keeps values finite")
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform(f: &GridFunction) -> GridFunction {
    let mut values = f.values().to_vec();
    fft::transform(&mut values, f.grid(), true, true, Direction::Inverse);
    GridFunction::new(*f.grid(), values).expect("unitary transform keeps values finite")
}

/// `F^{-1}(m F f)`, applied componentwise.
pub fn apply_multiplier(f: &GridFunction, m: &SpectralMultiplier) -> Result<GridFunction> {
    let table = m.table(f.grid())?;
    let grid = *f.grid();
    let mut values = f.values().to_vec();
    let (t, s) = (m.axes.reads_time(), m.axes.reads_space());
    fft::transform(&mut values, &grid, t, s, Direction::Forward);
    table.multiply(&mut values, &grid);
    fft::transform(&mut values, &grid, t, s, Direction::Inverse);
    GridFunction::new(grid, values)
}

/// Multiplies an already fully transformed field by `m` (no transforms).
pub fn multiply_spectrum(hat: &GridFunction, m: &SpectralMultiplier) -> Result<GridFunction> {
    let table = m.table(hat.grid())?;
    let mut values = hat.values().to_vec();
    table.multiply(&mut values, hat.grid());
    GridFunction::new(*hat.grid(), values)
}

/// Applies a time-frequency symbol to every component of a periodic line.
///
/// Non-finite samples propagate to the output instead of raising, so a
/// corrupted line can be isolated by the caller.
pub fn apply_line_multiplier<F>(line: &TimeLine, symbol: F) -> Result<TimeLine>
where
    F: Fn(f64) -> Complex64,
{
    let n = line.len();
    let period = line.period();
    let table: Vec<Complex64> = (0..n)
        .map(|k| {
            let w = angular_frequency(k, n, period);
            let v = symbol(w);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::SymbolNotFinite { freq: vec![w] })
            }
        })
        .collect::<Result<_>>()?;
    let mut values = line.values.clone();
    let c = line.components;
    fft::transform_line(&mut values, c, Direction::Forward);
    for (p, v) in values.iter_mut().enumerate() {
        *v *= table[p / c];
    }
    fft::transform_line(&mut values, c, Direction::Inverse);
    TimeLine::new(line.dt, c, values)
}

/// Sampled Mihlin quantity, a lower estimate of the best constant `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MihlinEstimate {
    pub value: f64,
    pub samples: usize,
    pub order_cap: usize,
    pub worst_frequency: Vec<f64>,
    pub worst_multi_index: Vec<usize>,
}

/// All multi-indices in `n` variables with total order at most `cap`.
pub fn multi_indices(n: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(n, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, cap, &mut Vec::with_capacity(n), &mut out);
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Relative finite-difference step for a derivative of total order `k`.
///
/// `1e-4` for low orders; for higher orders the step grows like
/// `eps^(1/(k+2))` so that roundoff does not swamp the difference quotient.
pub fn fd_relative_step(k: usize) -> f64 {
    1e-4f64.max(f64::EPSILON.powf(1.0 / (k as f64 + 2.0)))
}

/// `d^alpha m (xi)` by tensor-product central differences with step
/// `fd_relative_step(|alpha|) * |xi|` along every coordinate.
pub fn fd_partial(m: &SpectralMultiplier, xi: &[f64], alpha: &[usize]) -> Result<Complex64> {
    let order: usize = alpha.iter().sum();
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eval = |p: &[f64]| -> Result<Complex64> {
        let v = m.eval(p);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::SymbolNotFinite { freq: p.to_vec() })
        }
    };
    if order == 0 {
        return eval(xi);
    }
    let h = fd_relative_step(order) * r;
    let n = xi.len();
    // Odometer over j_i in 0..=alpha_i.
    let mut j = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut weight = 1.0;
        for i in 0..n {
            let k = alpha[i];
            weight *= binomial(k, j[i]) * if j[i] % 2 == 0 { 1.0 } else { -1.0 };
            point[i] = xi[i] + (k as f64 / 2.0 - j[i] as f64) * h;
        }
        acc += eval(&point)? * weight;
        let mut i = 0;
        loop {
            if i == n {
                return Ok(acc / h.powi(order as i32));
            }
            j[i] += 1;
            if j[i] <= alpha[i] {
                break;
            }
            j[i] = 0;
            i += 1;
        }
    }
}

/// `max_{|alpha| <= order_cap} |xi|^{|alpha|} |d^alpha m(xi)|` at one frequency.
pub fn mihlin_pointwise(
    m: &SpectralMultiplier,
    xi: &[f64],
    order_cap: usize,
) -> Result<(f64, Vec<usize>)> {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut best = (0.0, vec![0; xi.len()]);
    for alpha in multi_indices(xi.len(), order_cap) {
        let k = alpha.iter().sum::<usize>() as i32;
        let v = r.powi(k) * fd_partial(m, xi, &alpha)?.norm();
        if v > best.0 {
            best = (v, alpha);
        }
    }
    Ok(best)
}

/// Deterministic sample frequencies: radii log-spaced over `[1e-3, 1e3]`,
/// directions alternating in 1-D and pseudo-random (fixed seed) otherwise.
pub fn mihlin_sample_frequencies(n: usize, samples: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d69_686c);
    (0..samples)
        .map(|k| {
            let r = 10f64.powf(-3.0 + 6.0 * k as f64 / (samples - 1) as f64);
            if n == 1 {
                return vec![if k % 2 == 0 { r } else { -r }];
            }
            loop {
                let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-3 && norm <= 1.0 {
                    return dir.iter().map(|v| r * v / norm).collect();
                }
            }
        })
        .collect()
}

/// Sampled estimate of the Mihlin constant of `m` over multi-indices of
/// order at most `order_cap`. This is a lower estimate of the supremum.
pub fn mihlin_norm_estimate(
    m: &SpectralMultiplier,
    order_cap: usize,
    freq_samples: usize,
) -> Result<MihlinEstimate> {
    if order_cap < 1 {
        return Err(Error::arg("order_cap must be at least 1"));
    }
    if freq_samples < 64 {
        return Err(Error::arg("freq_samples must be at least 64"));
    }
    let n = m.freq_dim();
    if n == 0 {
        return Err(Error::arg("symbol reads no frequency variable"));
    }
    let mut est = MihlinEstimate {
        value: 0.0,
        samples: freq_samples,
        order_cap,
        worst_frequency: vec![],
        worst_multi_index: vec![],
    };
    for xi in mihlin_sample_frequencies(n, freq_samples) {
        let (v, alpha) = mihlin_pointwise(m, &xi, order_cap)?;
        if v > est.value || est.worst_frequency.is_empty() {
            est.value = v;
            est.worst_frequency = xi;
            est.worst_multi_index = alpha;
        }
    }
    Ok(est)
}
