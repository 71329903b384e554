//! Unitary discrete Fourier transforms along selected axes of a grid.
//!
//! Forward uses the kernel `exp(-i 2 pi j k / n)` and both directions are
//! scaled by `1/sqrt(n)` per axis, so the transform is an isometry of the
//! discrete `l^2` space and its inverse is its adjoint.

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Direction) -> std::sync::Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    }
}

/// Runs `count` contiguous length-`n` transforms stored back to back in `work`.
fn run_batched(work: &mut [Complex64], n: usize, dir: Direction) {
    let fft = plan(n, dir);
    let scale = 1.0 / (n as f64).sqrt();
    // Batches of whole lines; each line is transformed identically regardless
    // of how the batches are scheduled.
    let batch = n * 64;
    #[cfg(feature = "parallel")]
    work.par_chunks_mut(batch).for_each(|chunk| {
        fft.process(chunk);
        chunk.iter_mut().for_each(|v| *v *= scale);
    });
    #[cfg(not(feature = "parallel"))]
    work.chunks_mut(batch).for_each(|chunk| {
        fft.process(chunk);
        chunk.iter_mut().for_each(|v| *v *= scale);
    });
}

/// Transforms every line of length `n` and stride `stride` in `values`.
fn transform_strided(values: &mut [Complex64], n: usize, stride: usize, dir: Direction) {
    let len = values.len();
    let block = n * stride;
    let lines = len / n;
    let mut work = Vec::with_capacity(len);
    // Lines are enumerated block by block, then by offset inside the block.
    for b in 0..len / block {
        for off in 0..stride {
            let start = b * block + off;
            work.extend((0..n).map(|j| values[start + j * stride]));
        }
    }
    debug_assert_eq!(work.len(), lines * n);
    run_batched(&mut work, n, dir);
    let mut line = 0;
    for b in 0..len / block {
        for off in 0..stride {
            let start = b * block + off;
            for j in 0..n {
                values[start + j * stride] = work[line * n + j];
            }
            line += 1;
        }
    }
}

/// Applies the unitary DFT along the time axis (if `time`) and along every
/// spatial axis (if `space`) of a value array laid out on `grid`.
pub fn transform(values: &mut [Complex64], grid: &Grid, time: bool, space: bool, dir: Direction) {
    assert_eq!(values.len(), grid.len(), "value array does not match grid");
    let n_comp = grid.components();
    if time {
        transform_strided(values, grid.n_t(), grid.spatial_nodes() * n_comp, dir);
    }
    if space {
        for axis in 0..grid.dim() {
            transform_strided(values, grid.n_x(), grid.spatial_stride(axis) * n_comp, dir);
        }
    }
}

/// Unitary DFT of each component of a `[t][component]` line.
pub fn transform_line(values: &mut [Complex64], components: usize, dir: Direction) {
    let n = values.len() / components;
    transform_strided(values, n, components, dir);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_axis_matches_direct_dft() {
        let n = 8;
        let x: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64).sin(), (j * j) as f64 * 0.1))
            .collect();
        let mut y = x.clone();
        transform_line(&mut y, 1, Direction::Forward);
        for k in 0..n {
            let direct: Complex64 = (0..n)
                .map(|j| x[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                .sum::<Complex64>()
                / (n as f64).sqrt();
            assert!((direct - y[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn strided_lines_are_independent() {
        // Two interleaved components: transforming the pair equals transforming each alone.
        let n = 16;
        let a: Vec<Complex64> = (0..n).map(|j| Complex64::new(j as f64, 0.0)).collect();
        let b: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.0, (j as f64).cos())).collect();
        let mut both: Vec<Complex64> = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
        transform_line(&mut both, 2, Direction::Forward);
        let mut ta = a.clone();
        let mut tb = b.clone();
        transform_line(&mut ta, 1, Direction::Forward);
        transform_line(&mut tb, 1, Direction::Forward);
        for j in 0..n {
            assert_eq!(both[2 * j], ta[j]);
            assert_eq!(both[2 * j + 1], tb[j]);
        }
    }
}
