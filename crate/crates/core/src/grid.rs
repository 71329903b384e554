//! Periodic space-time grids and the sampled fields that live on them.
//!
//! A [`Grid`] is the torus `[0, L_t) x [0, L_x)^d` sampled with `n_t` points in
//! time and `n_x` points along every spatial axis. Values of a [`GridFunction`]
//! are stored row-major with layout `(t, x_1, ..., x_d, component)`, so the
//! component index varies fastest and the time index slowest.
//!
//! Frequency convention: index `i` on an axis with `n` samples and length `L`
//! corresponds to the integer wavenumber `k = i` for `i < n/2` and `k = i - n`
//! otherwise, i.e. `k` in `[-n/2, n/2)`, and to the continuous angular
//! frequency `2 pi k / L`. Every spectral routine in the crate uses this map.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of each axis that must stay free of support for a localized field.
pub const PADDING_FRACTION: f64 = 0.25;

/// Continuous angular frequency of DFT index `i` on an axis with `n` samples.
#[inline]
pub fn angular_frequency(i: usize, n: usize, len: f64) -> f64 {
    2.0 * PI * wavenumber(i, n) as f64 / len
}

/// Signed wavenumber in `[-n/2, n/2)` of DFT index `i`.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    n_t: usize,
    n_x: usize,
    len_t: f64,
    len_x: f64,
    components: usize,
}

/// Unvalidated wire form of a [`Grid`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
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

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.dim, s.n_t, s.n_x, s.len_t, s.len_x, s.components)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            dim: g.dim,
            n_t: g.n_t,
            n_x: g.n_x,
            len_t: g.len_t,
            len_x: g.len_x,
            components: g.components,
        }
    }
}

impl Grid {
    pub fn new(
        dim: usize,
        n_t: usize,
        n_x: usize,
        len_t: f64,
        len_x: f64,
        components: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("spatial dimension must be at least 1".into()));
        }
        for (name, n) in [("n_t", n_t), ("n_x", n_x)] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two and at least 4"
                )));
            }
        }
        if !(len_t.is_finite() && len_t > 0.0 && len_x.is_finite() && len_x > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box lengths must be positive, got L_t = {len_t}, L_x = {len_x}"
            )));
        }
        if components == 0 {
            return Err(Error::InvalidGrid("need at least one component".into()));
        }
        let total = n_x
            .checked_pow(dim as u32)
            .and_then(|s| s.checked_mul(n_t))
            .and_then(|s| s.checked_mul(components));
        if total.is_none() {
            return Err(Error::InvalidGrid("grid is too large".into()));
        }
        Ok(Grid {
            dim,
            n_t,
            n_x,
            len_t,
            len_x,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_t(&self) -> usize {
        self.n_t
    }
    pub fn n_x(&self) -> usize {
        self.n_x
    }
    pub fn len_t(&self) -> f64 {
        self.len_t
    }
    pub fn len_x(&self) -> f64 {
        self.len_x
    }
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dt(&self) -> f64 {
        self.len_t / self.n_t as f64
    }

    pub fn dx(&self) -> f64 {
        self.len_x / self.n_x as f64
    }

    /// Number of spatial nodes, `n_x^d`.
    pub fn spatial_nodes(&self) -> usize {
        self.n_x.pow(self.dim as u32)
    }

    /// Number of space-time nodes.
    pub fn nodes(&self) -> usize {
        self.n_t * self.spatial_nodes()
    }

    /// Length of the value array of a field on this grid.
    pub fn len(&self) -> usize {
        self.nodes() * self.components
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Space-time volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.dt() * self.spatial_cell_volume()
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn time_at(&self, it: usize) -> f64 {
        it as f64 * self.dt()
    }

    /// Fills `out` (length `d`) with the coordinates of flat spatial index `ix`.
    pub fn spatial_coords(&self, ix: usize, out: &mut [f64]) {
        let dx = self.dx();
        let mut rest = ix;
        for k in (0..self.dim).rev() {
            out[k] = (rest % self.n_x) as f64 * dx;
            rest /= self.n_x;
        }
    }

    /// Fills `out` with the per-axis integer indices of flat spatial index `ix`.
    pub fn spatial_multi_index(&self, ix: usize, out: &mut [usize]) {
        let mut rest = ix;
        for k in (0..self.dim).rev() {
            out[k] = rest % self.n_x;
            rest /= self.n_x;
        }
    }

    pub fn spatial_flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n_x + i)
    }

    /// Stride (in nodes) of spatial axis `axis` within the flat spatial index.
    pub fn spatial_stride(&self, axis: usize) -> usize {
        self.n_x.pow((self.dim - 1 - axis) as u32)
    }

    /// Offset of node `(it, ix)` component `c` in the value array.
    #[inline]
    pub fn index(&self, it: usize, ix: usize, c: usize) -> usize {
        (it * self.spatial_nodes() + ix) * self.components + c
    }

    pub fn with_components(&self, components: usize) -> Result<Grid> {
        Grid::new(self.dim, self.n_t, self.n_x, self.len_t, self.len_x, components)
    }

    /// Same box with `factor` times as many samples per axis.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(
            self.dim,
            self.n_t * factor,
            self.n_x * factor,
            self.len_t,
            self.len_x,
            self.components,
        )
    }

    /// Same box with `factor` times fewer samples per axis.
    pub fn coarsened(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || self.n_t % factor != 0 || self.n_x % factor != 0 {
            return Err(Error::InvalidGrid(format!("cannot coarsen by {factor}")));
        }
        Grid::new(
            self.dim,
            self.n_t / factor,
            self.n_x / factor,
            self.len_t,
            self.len_x,
            self.components,
        )
    }

    pub fn padding_margin_t(&self) -> f64 {
        0.5 * PADDING_FRACTION * self.len_t
    }

    pub fn padding_margin_x(&self) -> f64 {
        0.5 * PADDING_FRACTION * self.len_x
    }

    /// `true` when the grid sits outside the `d >= 2` regime of the theory.
    pub fn outside_hypotheses(&self) -> bool {
        self.dim < 2
    }
}

/// Complex, `N`-vector valued samples on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidField(format!("non-finite value at offset {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f(t, x, component)` at every node.
    pub fn from_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], usize) -> Complex64,
    {
        let mut values = Vec::with_capacity(grid.len());
        let mut x = vec![0.0; grid.dim()];
        for it in 0..grid.n_t() {
            let t = grid.time_at(it);
            for ix in 0..grid.spatial_nodes() {
                grid.spatial_coords(ix, &mut x);
                for c in 0..grid.components() {
                    values.push(f(t, &x, c));
                }
            }
        }
        GridFunction::new(grid, values)
    }

    pub fn from_real_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], usize) -> f64,
    {
        Self::from_fn(grid, |t, x, c| Complex64::new(f(t, x, c), 0.0))
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Raw mutable access. Callers are responsible for keeping entries finite;
    /// see [`GridFunction::validate`].
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidField(format!("non-finite value at offset {i}")));
        }
        Ok(())
    }

    pub fn get(&self, it: usize, ix: usize, c: usize) -> Complex64 {
        self.values[self.grid.index(it, ix, c)]
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Euclidean norm of the component vector at node `(it, ix)`.
    pub fn node_abs(&self, it: usize, ix: usize) -> f64 {
        let start = self.grid.index(it, ix, 0);
        self.values[start..start + self.grid.components()]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &GridFunction, b: Complex64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Pointwise product with a scalar real field on the same nodes.
    pub fn multiply_scalar_field(&self, chi: &GridFunction) -> Result<Self> {
        if chi.grid.components() != 1 || chi.grid.nodes() != self.grid.nodes() {
            return Err(Error::InvalidField("cutoff must be scalar on the same nodes".into()));
        }
        let n = self.grid.components();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * chi.values[i / n])
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            values,
        })
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidField("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Hermitian `L^2` inner product `sum f . conj(g) dV`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(f, g)| f * g.conj())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Bilinear pairing `sum f . g dV` (no conjugation).
    pub fn pairing(&self, other: &GridFunction) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(f, g)| f * g).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// `L^q` norm over the whole box with Euclidean norm across components.
    /// `q = f64::INFINITY` gives the maximum.
    pub fn lp_norm(&self, q: f64) -> f64 {
        let abs = (0..self.grid.n_t())
            .flat_map(|it| (0..self.grid.spatial_nodes()).map(move |ix| (it, ix)))
            .map(|(it, ix)| self.node_abs(it, ix));
        lp_from_abs(abs, q, self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    /// Time line through spatial node `ix`.
    pub fn time_line(&self, ix: usize) -> TimeLine {
        let n = self.grid.components();
        let mut values = Vec::with_capacity(self.grid.n_t() * n);
        for it in 0..self.grid.n_t() {
            let start = self.grid.index(it, ix, 0);
            values.extend_from_slice(&self.values[start..start + n]);
        }
        TimeLine {
            dt: self.grid.dt(),
            components: n,
            values,
        }
    }

    pub fn set_time_line(&mut self, ix: usize, line: &TimeLine) {
        let n = self.grid.components();
        for it in 0..self.grid.n_t() {
            let start = self.grid.index(it, ix, 0);
            self.values[start..start + n].copy_from_slice(&line.values[it * n..(it + 1) * n]);
        }
    }

    /// Component vectors of the spatial slice at time index `it`.
    pub fn time_slice(&self, it: usize) -> &[Complex64] {
        let n = self.grid.spatial_nodes() * self.grid.components();
        &self.values[it * n..(it + 1) * n]
    }
}

pub(crate) fn lp_from_abs(abs: impl Iterator<Item = f64>, q: f64, weight: f64) -> f64 {
    if q.is_infinite() {
        return abs.fold(0.0, |m: f64, v| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v) });
    }
    // Scale by the maximum so large q does not overflow.
    let vals: Vec<f64> = abs.collect();
    let m = vals.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 || !m.is_finite() {
        return if m.is_nan() || vals.iter().any(|v| v.is_nan()) { f64::NAN } else { m };
    }
    let s: f64 = vals.iter().map(|v| (v / m).powf(q)).sum();
    m * (s * weight).powf(1.0 / q)
}

/// Samples of an `N`-vector valued function of time on a periodic line.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLine {
    pub dt: f64,
    pub components: usize,
    /// Layout `[t][component]`.
    pub values: Vec<Complex64>,
}

impl TimeLine {
    pub fn new(dt: f64, components: usize, values: Vec<Complex64>) -> Result<Self> {
        if components == 0 || values.len() % components != 0 || !(dt > 0.0) {
            return Err(Error::arg("time line needs dt > 0 and whole component vectors"));
        }
        Ok(TimeLine {
            dt,
            components,
            values,
        })
    }

    pub fn scalar(dt: f64, values: &[f64]) -> Self {
        TimeLine {
            dt,
            components: 1,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.dt * self.len() as f64
    }

    #[inline]
    pub fn abs_at(&self, i: usize) -> f64 {
        let n = self.components;
        self.values[i * n..(i + 1) * n]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean distance between the samples at `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let n = self.components;
        (0..n)
            .map(|c| (self.values[i * n + c] - self.values[j * n + c]).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        if self.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return f64::NAN;
        }
        (0..self.len()).map(|i| self.abs_at(i)).fold(0.0, f64::max)
    }

    pub fn lp_norm(&self, q: f64) -> f64 {
        lp_from_abs((0..self.len()).map(|i| self.abs_at(i)), q, self.dt)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TimeLine {
            dt: self.dt,
            components: self.components,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}
