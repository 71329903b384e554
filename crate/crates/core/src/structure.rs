//! Structure of the parabolic system `du_i/dt = div A_i(t, x, grad u) + B_i(t, x, grad u)`.
//!
//! The flux has the regularized p-Laplace form
//!
//! `A_i(t, x, V) = a(x) (|V|^2 + eps_reg^2)^{(p - 2)/2} V_i + F_i(t, x)`
//!
//! and `B_i(t, x, V) = f_i(t, x)`, with `F_i = g e_1 / sqrt(N)` and
//! `f_i = g / sqrt(N)` for one scalar profile `g`. Here `V` is the `N x d`
//! gradient and `V_i` its `i`-th row. The growth and coercivity constants are
//! derived from the coefficient range, `eps_reg` and the forcing amplitude,
//! then spot-checked on random samples.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS_REG: f64 = 1e-8;

/// Spatial coefficient `a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coefficient {
    Unit,
    /// Piecewise constant on `cells^d` congruent cells of the box, with
    /// values `contrast^U`, `U` uniform on `[0, 1)`.
    Rough { contrast: f64, cells: usize, seed: u64 },
}

/// Smooth forcing of amplitude `amplitude`: `F` in the flux and `f` as `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub amplitude: f64,
    /// Temporal period of the forcing.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub name: String,
    pub p: f64,
    pub eps_reg: f64,
    pub coefficient: Coefficient,
    pub forcing: Option<Forcing>,
    /// Growth constant for `A`.
    pub c1: f64,
    /// Growth constant for `B`.
    pub c2: f64,
    /// Coercivity constant.
    pub c3: f64,
    /// Constant bounds for `h1, h2, h3`.
    pub h: [f64; 3],
    /// `h1 + h2 + h3`.
    pub c4: f64,
}

/// Names accepted by [`StructureSpec::preset`].
pub const PRESETS: [&str; 5] = ["heat", "plaplace-1.5", "plaplace-3", "plaplace-4", "rough-linear"];

fn young_remainder(force: f64, c: f64, p: f64) -> f64 {
    // sup_{m >= 0} (force m - c m^p)
    if force <= 0.0 {
        return 0.0;
    }
    let m = (force / (c * p)).powf(1.0 / (p - 1.0));
    force * m - c * m.powf(p)
}

impl StructureSpec {
    /// Builds a spec and derives `c1, c2, c3` and the `h` bounds.
    pub fn new(
        name: impl Into<String>,
        p: f64,
        eps_reg: f64,
        coefficient: Coefficient,
        forcing: Option<Forcing>,
    ) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::StructureViolation(format!("p must exceed 1, got {p}")));
        }
        if !(eps_reg >= 0.0 && eps_reg.is_finite()) {
            return Err(Error::StructureViolation(format!("eps_reg must be nonnegative, got {eps_reg}")));
        }
        if p < 2.0 && eps_reg == 0.0 {
            return Err(Error::StructureViolation("p < 2 needs eps_reg > 0".into()));
        }
        let (a_min, a_max) = match &coefficient {
            Coefficient::Unit => (1.0, 1.0),
            Coefficient::Rough { contrast, cells, .. } => {
                if !(*contrast >= 1.0 && contrast.is_finite()) || *cells == 0 {
                    return Err(Error::StructureViolation("rough coefficient needs contrast >= 1 and cells >= 1".into()));
                }
                (1.0, *contrast)
            }
        };
        let force = match forcing {
            Some(Forcing { amplitude, period }) => {
                if !(amplitude.is_finite() && period > 0.0) {
                    return Err(Error::StructureViolation("forcing needs finite amplitude and positive period".into()));
                }
                amplitude.abs()
            }
            None => 0.0,
        };
        let (c1, h1, c3_raw, h3_raw) = if p >= 2.0 {
            let k = 2f64.powf(p - 2.0);
            (a_max * k, a_max * k * eps_reg.powf(p - 1.0) + force, a_min, 0.0)
        } else {
            let k = 2f64.powf(p - 2.0);
            (a_max, force, a_min * k, a_min * k * eps_reg.powf(p))
        };
        let (c3, h3) = if force > 0.0 {
            (0.5 * c3_raw, h3_raw + young_remainder(force, 0.5 * c3_raw, p))
        } else {
            (c3_raw, h3_raw)
        };
        let h = [h1, force, h3];
        Ok(StructureSpec {
            name: name.into(),
            p,
            eps_reg,
            coefficient,
            forcing,
            c1,
            c2: 1.0,
            c3,
            h,
            c4: h.iter().sum(),
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "heat" => Self::new(name, 2.0, DEFAULT_EPS_REG, Coefficient::Unit, None),
            "plaplace-1.5" => Self::new(name, 1.5, DEFAULT_EPS_REG, Coefficient::Unit, None),
            "plaplace-3" => Self::new(name, 3.0, DEFAULT_EPS_REG, Coefficient::Unit, None),
            "plaplace-4" => Self::new(name, 4.0, DEFAULT_EPS_REG, Coefficient::Unit, None),
            "rough-linear" => Self::new(
                name,
                2.0,
                DEFAULT_EPS_REG,
                Coefficient::Rough { contrast: 10.0, cells: 8, seed: 0x726f_7567 },
                Some(Forcing { amplitude: 0.5, period: 1.0 }),
            ),
            other => Err(Error::arg(format!("unknown preset `{other}`; expected one of {PRESETS:?}"))),
        }
    }

    pub fn with_eps_reg(&self, eps_reg: f64) -> Result<Self> {
        Self::new(self.name.clone(), self.p, eps_reg, self.coefficient.clone(), self.forcing)
    }

    /// True when the system is in divergence form without sources.
    pub fn conservative(&self) -> bool {
        self.forcing.is_none()
    }

    /// Pure p-Laplace flux (unit coefficient, no forcing).
    pub fn is_pure_p_laplace(&self) -> bool {
        self.forcing.is_none() && self.coefficient == Coefficient::Unit
    }

    /// Evaluates `a(x)` for a box of side `len_x`.
    pub fn coefficient_fn(&self, len_x: f64, dim: usize) -> impl Fn(&[f64]) -> f64 + Send + Sync {
        let table: Option<(usize, Vec<f64>)> = match &self.coefficient {
            Coefficient::Unit => None,
            Coefficient::Rough { contrast, cells, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let n = cells.pow(dim as u32);
                Some((*cells, (0..n).map(|_| contrast.powf(rng.gen::<f64>())).collect()))
            }
        };
        move |x: &[f64]| match &table {
            None => 1.0,
            Some((cells, vals)) => {
                let mut idx = 0;
                for &xi in x {
                    let c = ((xi.rem_euclid(len_x) / len_x) * *cells as f64) as usize;
                    idx = idx * cells + c.min(cells - 1);
                }
                vals[idx]
            }
        }
    }

    /// Scalar forcing profile `g(t, x)`.
    pub fn forcing_profile(&self, len_x: f64) -> impl Fn(f64, &[f64]) -> f64 + Send + Sync {
        let forcing = self.forcing;
        move |t: f64, x: &[f64]| match forcing {
            None => 0.0,
            Some(Forcing { amplitude, period }) => {
                let s: f64 = x.iter().map(|v| (2.0 * PI * v / len_x).sin()).product();
                amplitude * s * (2.0 * PI * t / period).cos()
            }
        }
    }

    /// Frozen diffusivity `a (|V|^2 + eps^2)^{(p - 2)/2}` for `|V|^2 = v2`.
    pub fn diffusivity(&self, a: f64, v2: f64) -> f64 {
        if self.p == 2.0 {
            a
        } else {
            a * (v2 + self.eps_reg * self.eps_reg).powf(0.5 * (self.p - 2.0))
        }
    }

    /// `d/d(v2)` of [`Self::diffusivity`].
    pub fn diffusivity_derivative(&self, a: f64, v2: f64) -> f64 {
        if self.p == 2.0 {
            0.0
        } else {
            a * 0.5 * (self.p - 2.0) * (v2 + self.eps_reg * self.eps_reg).powf(0.5 * (self.p - 4.0))
        }
    }

    /// Largest derivative of the scalar flux `m -> a (m^2 + eps^2)^{(p-2)/2} m`
    /// relative to the frozen diffusivity; sets the explicit stiffness.
    pub fn stiffness_factor(&self) -> f64 {
        (self.p - 1.0).max(1.0)
    }

    /// Spot-checks growth and coercivity on `samples` random `(t, x, V)`.
    pub fn validate(&self, dim: usize, components: usize, samples: usize, seed: u64) -> Result<()> {
        let len_x = 1.0;
        let a_of = self.coefficient_fn(len_x, dim);
        let g_of = self.forcing_profile(len_x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; dim];
        let mut v = vec![0.0; dim * components];
        for _ in 0..samples {
            let t: f64 = rng.gen_range(0.0..4.0);
            x.iter_mut().for_each(|xi| *xi = rng.gen_range(0.0..len_x));
            v.iter_mut().for_each(|vi| *vi = rng.gen_range(-1.0..1.0));
            let dir = v.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-300);
            let m = 10f64.powf(rng.gen_range(-6.0..3.0));
            v.iter_mut().for_each(|vi| *vi *= m / dir);
            let a = a_of(&x);
            let g = g_of(t, &x) / (components as f64).sqrt();
            let w = self.diffusivity(a, m * m);
            let tol = 1e-12 * (1.0 + m.powf(self.p) + m.powf(self.p - 1.0));
            let mut coercive = 0.0;
            for i in 0..components {
                let row = &v[i * dim..(i + 1) * dim];
                let mut ai: Vec<f64> = row.iter().map(|r| w * r).collect();
                ai[0] += g;
                let norm = ai.iter().map(|r| r * r).sum::<f64>().sqrt();
                if norm > self.c1 * m.powf(self.p - 1.0) + self.h[0] + tol {
                    return Err(Error::StructureViolation(format!(
                        "growth of A fails at |V| = {m:e}: {norm:e} > {:e}",
                        self.c1 * m.powf(self.p - 1.0) + self.h[0]
                    )));
                }
                if g.abs() > self.c2 * m.powf(self.p - 1.0) + self.h[1] + tol {
                    return Err(Error::StructureViolation(format!("growth of B fails at |V| = {m:e}")));
                }
                coercive += ai.iter().zip(row).map(|(p, q)| p * q).sum::<f64>();
            }
            if coercive < self.c3 * m.powf(self.p) - self.h[2] - tol {
                return Err(Error::StructureViolation(format!(
                    "coercivity fails at |V| = {m:e}: {coercive:e} < {:e}",
                    self.c3 * m.powf(self.p) - self.h[2]
                )));
            }
        }
        Ok(())
    }
}
