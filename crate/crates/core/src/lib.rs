//! Harmonic-analysis toolkit on periodic space-time grids: Fourier
//! multipliers, Bessel potentials, Littlewood-Paley Hölder estimates,
//! complex interpolation checks and a finite-difference p-Laplace solver,
//! combined into an end-to-end regularity report.

pub mod error;
pub mod exponents;
pub mod fft;
pub mod grid;
pub mod interpolation;
pub mod io;
pub mod kernel;
pub mod lp_holder;
pub mod mollify;
pub mod potentials;
pub mod pipeline;
pub mod probes;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod structure;
pub mod verdict;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, TimeLine};
pub use exponents::ExponentSet;
pub use spectral::{apply_multiplier, AxisSet, SpectralMultiplier};
pub use verdict::Verdict;
