//! Exponent bookkeeping for the time-regularity estimate.
//!
//! With `p` the growth exponent and `delta` the higher-integrability gain:
//!
//! * `alpha = (1/p - 1/(p + delta)) / 2`
//! * `q = 2 / (1 - 2 alpha)`, equivalently `1/q = 1/2 + (1/(p + delta) - 1/p)/2`
//! * `p' = p / (p - 1)`
//!
//! The interpolation step uses `theta = 1/2`, `q0 = p + delta`, `q1 = p'`, and
//! then `2/q = 1/(p + delta) + 1/p'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    pub q: f64,
    pub q_hat: f64,
    pub p_prime: f64,
    pub dim: usize,
}

/// `q_theta` from `1/q_theta = (1 - theta)/q0 + theta/q1`.
pub fn q_theta(theta: f64, q0: f64, q1: f64) -> f64 {
    1.0 / ((1.0 - theta) / q0 + theta / q1)
}

/// Hölder conjugate `r / (r - 1)`.
pub fn conjugate(r: f64) -> f64 {
    r / (r - 1.0)
}

impl ExponentSet {
    pub fn new(p: f64, delta: f64, q_hat: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("dimension must be at least 1"));
        }
        let p_min = 2.0 * dim as f64 / (dim as f64 + 2.0);
        if !(p > p_min && p.is_finite()) {
            return Err(Error::arg(format!("p must exceed 2d/(d+2) = {p_min}, got {p}")));
        }
        if p <= 1.0 {
            return Err(Error::arg(format!("p must exceed 1, got {p}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::arg(format!("delta must be nonnegative, got {delta}")));
        }
        if !(q_hat > 1.0) {
            return Err(Error::arg(format!("q_hat must exceed 1, got {q_hat}")));
        }
        if delta == 0.0 {
            return Err(Error::DegenerateExponent);
        }
        let alpha = 0.5 * (1.0 / p - 1.0 / (p + delta));
        Ok(ExponentSet {
            p,
            delta,
            alpha,
            q: 2.0 / (1.0 - 2.0 * alpha),
            q_hat,
            p_prime: conjugate(p),
            dim,
        })
    }

    /// `q` through the second form `1/q = 1/2 + (1/(p + delta) - 1/p)/2`.
    pub fn q_alternate(&self) -> f64 {
        1.0 / (0.5 + 0.5 * (1.0 / (self.p + self.delta) - 1.0 / self.p))
    }

    pub fn theta(&self) -> f64 {
        0.5
    }

    pub fn q0(&self) -> f64 {
        self.p + self.delta
    }

    pub fn q1(&self) -> f64 {
        self.p_prime
    }

    /// Interpolated exponent at `theta = 1/2`; equals `q`.
    pub fn q_interp(&self) -> f64 {
        q_theta(0.5, self.q0(), self.q1())
    }

    /// Runs with `d = 1` lie outside the range the estimate is stated for.
    pub fn outside_hypotheses(&self) -> bool {
        self.dim < 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_delta() {
        assert!(matches!(ExponentSet::new(3.0, 0.0, 2.0, 2), Err(Error::DegenerateExponent)));
        assert!(ExponentSet::new(0.9, 0.1, 2.0, 2).is_err());
    }

    #[test]
    fn sample_values() {
        let e = ExponentSet::new(3.0, 1.0, 2.0, 2).unwrap();
        assert!((e.alpha - (1.0 / 3.0 - 0.25) / 2.0).abs() < 1e-16);
        assert!((e.p_prime - 1.5).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn exponent_identities(p in 1.1f64..8.0, delta in 1e-3f64..4.0) {
            let e = ExponentSet::new(p, delta, 2.0, 2).unwrap();
            prop_assert!(e.alpha > 0.0 && e.alpha < 0.5 / p);
            prop_assert!((1.0 / e.q - 1.0 / e.q_alternate()).abs() < 1e-14);
            prop_assert!((2.0 / e.q_interp() - (1.0 / (p + delta) + 1.0 / e.p_prime)).abs() < 1e-14);
            prop_assert!((1.0 / e.q - 1.0 / e.q_interp()).abs() < 1e-14);
        }
    }
}
